import numpy as np
import pytest

from qcdyn.material import (Dims, build_material, check_energy_pd,
                            identity_rank4, sym_identity_rank4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_pd_material(rng, n_par, n_perp, coupling=0.5, friction="pd",
                       rho=None):
    """Random material whose elastic energy form is strictly PD.

    ``friction``: "pd" (strictly positive definite), "psd" (one zero
    eigenvalue when n_perp > 1), or "zero".
    """
    p, r = n_par, n_perp
    c = rng.normal(size=(p, p, p, p))
    c = c + c.transpose(1, 0, 2, 3)
    c = c + c.transpose(0, 1, 3, 2)
    c = c + c.transpose(2, 3, 0, 1)
    e = rng.normal(size=(r, p, r, p))
    e = e + e.transpose(2, 3, 0, 1)
    d = rng.normal(size=(p, p, r, p))
    d = coupling * (d + d.transpose(1, 0, 2, 3))

    if friction == "zero":
        fr = np.zeros((r, r))
    else:
        a = rng.normal(size=(r, r))
        if friction == "psd" and r > 1:
            a[:, -1] = 0.0
            fr = a @ a.T
        else:
            fr = a @ a.T + 0.05 * np.eye(r)

    rho = float(rng.uniform(0.5, 2.0)) if rho is None else rho
    mat = build_material(Dims(p, r), rho, c, d, e, fr)
    report = check_energy_pd(mat)
    shift = max(0.0, -report.min_eigenvalue) + 0.5
    c = mat.c_tensor + shift * sym_identity_rank4(p)
    e = mat.e_tensor + shift * identity_rank4(r, p)
    mat = build_material(Dims(p, r), rho, c, mat.d_tensor, e, mat.friction)
    assert check_energy_pd(mat).is_pd
    return mat


def random_point_state(rng, mat, scale=1.0):
    from qcdyn.constitutive import PointState

    p, r = mat.n_par, mat.n_perp
    return PointState(beta_par=scale * rng.normal(size=(p, p)),
                      beta_perp=scale * rng.normal(size=(r, p)),
                      v_par=scale * rng.normal(size=p),
                      v_perp=scale * rng.normal(size=r))
