"""Real scalar and velocity fields on the layer.

A SpectralField stores complex Fourier coefficients per x-mode, each a
z-profile sampled on the domain's Lobatto nodes. Hermitian symmetry
(coeffs[-m] = conj(coeffs[m])) keeps the field real. Velocity fields are
derived from a streamfunction, so they are divergence-free identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .domain import DomainSpec, build_domain

_HERMITIAN_RTOL = 1e-10


def _check_hermitian(coeffs: np.ndarray, where: str = "") -> None:
    scale = np.max(np.abs(coeffs)) or 1.0
    err = np.max(np.abs(coeffs - np.conj(coeffs[::-1])))
    if err > _HERMITIAN_RTOL * scale:
        raise ValueError(
            f"coefficients are not Hermitian-symmetric{where}: "
            f"relative asymmetry {err / scale:.3e}"
        )


@dataclass(frozen=True)
class SpectralField:
    """Real scalar field: modes m = -M..M (rows) x z-nodes (columns)."""

    domain: DomainSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.domain.n_modes, self.domain.N_z):
            raise ValueError(
                f"coeffs shape {c.shape} does not match "
                f"({self.domain.n_modes}, {self.domain.N_z})"
            )
        _check_hermitian(c)
        # exact symmetrization removes roundoff drift from upstream FFTs
        c = 0.5 * (c + np.conj(c[::-1]))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- basic algebra (convenience for tests and demos) ------------------
    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._same_domain(other)
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._same_domain(other)
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.domain, -self.coeffs)

    def _same_domain(self, other: "SpectralField") -> None:
        if other.domain is not self.domain and (
            other.domain.l_x != self.domain.l_x
            or other.domain.M != self.domain.M
            or other.domain.N_z != self.domain.N_z
        ):
            raise ValueError("fields live on different domains")

    # -- structure ---------------------------------------------------------
    def mode_profile(self, m: int) -> np.ndarray:
        """z-profile of Fourier mode m."""
        return self.coeffs[self.domain.mode_slot(m)]

    def active_modes(self, rtol: float = 1e-13) -> np.ndarray:
        """Mode indices whose profiles are not numerically zero."""
        mags = np.max(np.abs(self.coeffs), axis=1)
        cutoff = rtol * (np.max(mags) if np.max(mags) > 0 else 1.0)
        return self.domain.mode_numbers[mags > cutoff]

    def max_active_mode(self) -> int:
        act = self.active_modes()
        return int(np.max(np.abs(act))) if act.size else 0

    def evaluate(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Pointwise values at arbitrary (x, z); broadcasts over inputs."""
        from .domain import interpolation_matrix

        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        p = interpolation_matrix(self.domain.z_grid, z.ravel())
        prof = self.coeffs @ p.T  # (n_modes, nz)
        phases = np.exp(
            2j * np.pi * np.outer(self.domain.mode_numbers, x.ravel()) / self.domain.l_x
        )
        vals = np.einsum("mz,mx->xz", prof, phases)
        return np.real(vals).reshape(x.shape + z.shape)

    def values(self, n_x: int | None = None, fine_z: bool = False) -> np.ndarray:
        """Physical-space values on an (n_x, nz) tensor grid.

        x-points are uniform on [0, l_x); z is the nodal grid (or the fine
        quadrature grid when fine_z). n_x defaults to the dealiased size.
        """
        if n_x is None:
            n_x = dealias_size(2 * self.domain.M)
        prof = self.coeffs
        if fine_z:
            prof = prof @ self.domain.P_fine.T
        return modes_to_grid(prof, self.domain.M, n_x)


def dealias_size(max_product_mode: int) -> int:
    """An FFT-friendly grid size holding modes up to max_product_mode exactly."""
    from scipy.fft import next_fast_len

    return int(next_fast_len(max(8, 2 * max_product_mode + 1), real=True))


def modes_to_grid(prof: np.ndarray, M: int, n_x: int) -> np.ndarray:
    """Inverse transform of (2M+1, nz) coefficients to an (n_x, nz) grid."""
    if n_x < 2 * M + 1:
        raise ValueError("grid too small for the stored modes")
    nz = prof.shape[1]
    spec = np.zeros((n_x, nz), dtype=complex)
    spec[0] = prof[M]
    for m in range(1, M + 1):
        spec[m] = prof[M + m]
        spec[n_x - m] = prof[M - m]
    return np.real(np.fft.ifft(spec * n_x, axis=0))


def grid_to_modes(vals: np.ndarray, M: int) -> np.ndarray:
    """Forward transform of an (n_x, nz) grid to (2M+1, nz) coefficients."""
    n_x = vals.shape[0]
    if n_x < 2 * M + 1:
        raise ValueError("grid too small for the requested modes")
    spec = np.fft.fft(vals, axis=0) / n_x
    out = np.empty((2 * M + 1, vals.shape[1]), dtype=complex)
    out[M] = spec[0]
    for m in range(1, M + 1):
        out[M + m] = spec[m]
        out[M - m] = spec[n_x - m]
    return out


def field_from_profiles(domain: DomainSpec, profiles: dict[int, np.ndarray]) -> SpectralField:
    """Assemble a field from {mode m: profile}; negative modes filled by symmetry."""
    c = np.zeros((domain.n_modes, domain.N_z), dtype=complex)
    for m, prof in profiles.items():
        c[domain.mode_slot(m)] += np.asarray(prof, dtype=complex)
        if m != 0:
            c[domain.mode_slot(-m)] += np.conj(np.asarray(prof, dtype=complex))
    if 0 in profiles:
        slot = domain.mode_slot(0)
        if np.max(np.abs(np.imag(c[slot]))) > 1e-12 * max(np.max(np.abs(c[slot])), 1e-300):
            raise ValueError("mode-0 profile must be real")
        c[slot] = np.real(c[slot])
    return SpectralField(domain, c)


def zero_field(domain: DomainSpec) -> SpectralField:
    return SpectralField(domain, np.zeros((domain.n_modes, domain.N_z), dtype=complex))


# -- differentiation ---------------------------------------------------------

def dx(f: SpectralField) -> SpectralField:
    """Exact x-derivative (mode multiplication by i*k)."""
    k = f.domain.wavenumbers
    return SpectralField(f.domain, 1j * k[:, None] * f.coeffs)


def dz(f: SpectralField) -> SpectralField:
    """z-derivative of the polynomial interpolant (collocation matrix)."""
    return SpectralField(f.domain, f.coeffs @ f.domain.D.T)


def laplacian(f: SpectralField) -> SpectralField:
    k = f.domain.wavenumbers
    d = f.domain.D
    out = f.coeffs @ (d @ d).T - (k ** 2)[:, None] * f.coeffs
    return SpectralField(f.domain, out)


# -- exact pairings ----------------------------------------------------------

def pair(f: SpectralField, g: SpectralField) -> float:
    """Volume average of f*g, exact for the representatives."""
    b = f.domain.B
    fa, ga = f.active_modes(), g.active_modes()
    modes = np.intersect1d(fa, ga)
    if modes.size == 0:
        return 0.0
    rows = modes + f.domain.M
    cf, cg = f.coeffs[rows], g.coeffs[rows]
    return float(np.real(np.einsum("mi,ij,mj->", np.conj(cf), b, cg)))


def grad_pair(f: SpectralField, g: SpectralField) -> float:
    """Volume average of grad f . grad g, exact."""
    dom = f.domain
    b, d = dom.B, dom.D
    fa, ga = f.active_modes(), g.active_modes()
    modes = np.intersect1d(fa, ga)
    if modes.size == 0:
        return 0.0
    rows = modes + dom.M
    k = dom.wavenumbers[rows]
    cf, cg = f.coeffs[rows], g.coeffs[rows]
    dzf, dzg = cf @ d.T, cg @ d.T
    val = np.einsum("mi,ij,mj->", np.conj(dzf), b, dzg)
    val += np.einsum("m,mi,ij,mj->", k ** 2, np.conj(cf), b, cg)
    return float(np.real(val))


def l2_norm(f: SpectralField) -> float:
    """sqrt of the volume-averaged square of f."""
    return float(np.sqrt(max(pair(f, f), 0.0)))


def h1_seminorm(f: SpectralField) -> float:
    """sqrt of the volume-averaged squared gradient of f."""
    return float(np.sqrt(max(grad_pair(f, f), 0.0)))


def horizontal_mean_product(f: SpectralField, g: SpectralField, fine: bool = True) -> np.ndarray:
    """z-profile of the horizontal average of f*g (exact, on the fine grid)."""
    dom = f.domain
    modes = np.intersect1d(f.active_modes(), g.active_modes())
    if modes.size == 0:
        n = len(dom.z_fine) if fine else dom.N_z
        return np.zeros(n)
    rows = modes + dom.M
    cf, cg = f.coeffs[rows], g.coeffs[rows]
    if fine:
        cf = cf @ dom.P_fine.T
        cg = cg @ dom.P_fine.T
    return np.real(np.sum(np.conj(cf) * cg, axis=0))


# -- velocity ----------------------------------------------------------------

@dataclass(frozen=True)
class VelocityField:
    """Divergence-free 2D velocity (u_x, u_z) derived from a streamfunction."""

    psi: SpectralField
    u_x: SpectralField = field(default=None)
    u_z: SpectralField = field(default=None)

    @property
    def w(self) -> SpectralField:
        """Vertical component (the transport-carrying one)."""
        return self.u_z

    @property
    def domain(self) -> DomainSpec:
        return self.psi.domain

    def __neg__(self) -> "VelocityField":
        return VelocityField(-self.psi, -self.u_x, -self.u_z)

    def __mul__(self, scalar: float) -> "VelocityField":
        s = float(scalar)
        return VelocityField(self.psi * s, self.u_x * s, self.u_z * s)

    __rmul__ = __mul__


def streamfunction_to_velocity(psi: SpectralField) -> VelocityField:
    """u = (-d_z psi, d_x psi); checks the discrete divergence residual."""
    u_x = -1.0 * dz(psi)
    u_z = dx(psi)
    div = dx(u_x) + dz(u_z)
    scale = h1_seminorm(psi)
    if scale > 0:
        rel = l2_norm(div) / scale
        if rel > 1e-10:
            raise ValueError(f"divergence residual {rel:.3e} exceeds 1e-10")
    return VelocityField(psi, u_x, u_z)


def energy_norm(u: VelocityField) -> float:
    """Root volume-averaged kinetic intensity (|u|^2)^(1/2)."""
    return float(np.sqrt(max(pair(u.u_x, u.u_x) + pair(u.u_z, u.u_z), 0.0)))


def enstrophy_norm(u: VelocityField) -> float:
    """Root mean-square rate of strain (|grad u|^2)^(1/2)."""
    val = grad_pair(u.u_x, u.u_x) + grad_pair(u.u_z, u.u_z)
    return float(np.sqrt(max(val, 0.0)))


def scale_to_intensity(u: VelocityField, pe: float, constraint: str = "enstrophy") -> VelocityField:
    """Rescale u so the chosen intensity norm equals pe."""
    norm = enstrophy_norm(u) if constraint == "enstrophy" else energy_norm(u)
    if norm == 0:
        raise ValueError("cannot rescale the zero field")
    return u * (pe / norm)


# -- serialization -----------------------------------------------------------

def field_to_json(f: SpectralField) -> str:
    """Serialize as {l_x, M, N_z, coeffs: [[re, im], ...]} row-major (mode, node)."""
    flat = f.coeffs.ravel()
    payload = {
        "l_x": f.domain.l_x,
        "M": f.domain.M,
        "N_z": f.domain.N_z,
        "coeffs": [[float(c.real), float(c.imag)] for c in flat],
    }
    return json.dumps(payload)


def field_from_json(text: str, domain: DomainSpec | None = None) -> SpectralField:
    """Inverse of field_to_json; reuses `domain` when it matches."""
    payload = json.loads(text)
    l_x, m, n_z = payload["l_x"], payload["M"], payload["N_z"]
    if domain is None or (domain.l_x, domain.M, domain.N_z) != (l_x, m, n_z):
        domain = build_domain(l_x, m, n_z)
    raw = np.asarray(payload["coeffs"], dtype=float)
    if raw.shape != ((2 * m + 1) * n_z, 2):
        raise ValueError("coeffs length does not match (2M+1)*N_z")
    coeffs = (raw[:, 0] + 1j * raw[:, 1]).reshape(2 * m + 1, n_z)
    return SpectralField(domain, coeffs)


# -- randomized fields (shared by tests, the validate command, demos) --------

def random_scalar(domain: DomainSpec, rng: np.random.Generator,
                  max_mode: int | None = None, clamped: bool = False) -> SpectralField:
    """Random band-limited field vanishing at the walls (clamped: also slope)."""
    max_mode = domain.M if max_mode is None else min(max_mode, domain.M)
    z = domain.z_grid
    envelope = (z * (1 - z)) ** (2 if clamped else 1)
    profiles = {}
    n_smooth = min(6, domain.N_z - 4)
    for m in range(0, max_mode + 1):
        coef = rng.standard_normal(n_smooth) + 1j * rng.standard_normal(n_smooth)
        if m == 0:
            coef = np.real(coef).astype(complex)
        prof = np.zeros(domain.N_z, dtype=complex)
        for j, c in enumerate(coef):
            prof += c * np.cos(j * np.arccos(2 * z - 1))
        profiles[m] = envelope * prof
    return field_from_profiles(domain, profiles)


def random_velocity(domain: DomainSpec, rng: np.random.Generator,
                    max_mode: int | None = None, pe: float | None = None,
                    constraint: str = "enstrophy") -> VelocityField:
    """Random band-limited no-slip velocity, optionally scaled to intensity pe."""
    psi = random_scalar(domain, rng, max_mode=max_mode, clamped=True)
    u = streamfunction_to_velocity(psi)
    if pe is not None:
        u = scale_to_intensity(u, pe, constraint)
    return u
