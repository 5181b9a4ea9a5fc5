//! Finite-difference operators on the MAC grid.
//!
//! All operators are linear stencils over [`VelocityField`] / [`ScalarField`]
//! and are exact duals of each other in the cell-area weighted inner products:
//! `⟨grad q, w⟩ = −⟨q, div w⟩`, the Laplacian is symmetric negative definite,
//! and `⟨advect(a, w), w⟩ = 0` for every pair of admissible fields.

use crate::grid::{ScalarField, StaggeredGrid, VelocityField};

/// Central-difference divergence at cell centers.
pub fn divergence(w: &VelocityField) -> ScalarField {
    let g = *w.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(g);
    for i in 0..g.nx {
        for j in 0..g.ny {
            let d = (w.u(i + 1, j) - w.u(i, j)) / hx + (w.v(i, j + 1) - w.v(i, j)) / hy;
            out.set(i, j, d);
        }
    }
    out
}

/// Gradient of a cell-centered scalar on interior faces; boundary faces get 0.
pub fn gradient(q: &ScalarField) -> VelocityField {
    let g = *q.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VelocityField::zeros(g);
    for i in 1..g.nx {
        for j in 0..g.ny {
            out.set_u(i, j, (q.get(i, j) - q.get(i - 1, j)) / hx);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            out.set_v(i, j, (q.get(i, j) - q.get(i, j - 1)) / hy);
        }
    }
    out
}

/// 5-point Laplacian per component with homogeneous Dirichlet walls.
///
/// Tangential ghost values are reflections (`u_ghost = −u_wall-adjacent`),
/// which places the zero at the wall itself.
pub fn laplacian(w: &VelocityField) -> VelocityField {
    let g = *w.grid();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut out = VelocityField::zeros(g);
    for i in 1..g.nx {
        for j in 0..g.ny {
            let c = w.u(i, j);
            let south = if j == 0 { -c } else { w.u(i, j - 1) };
            let north = if j + 1 == g.ny { -c } else { w.u(i, j + 1) };
            let lap =
                (w.u(i + 1, j) - 2.0 * c + w.u(i - 1, j)) * ihx2 + (north - 2.0 * c + south) * ihy2;
            out.set_u(i, j, lap);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            let c = w.v(i, j);
            let west = if i == 0 { -c } else { w.v(i - 1, j) };
            let east = if i + 1 == g.nx { -c } else { w.v(i + 1, j) };
            let lap =
                (east - 2.0 * c + west) * ihx2 + (w.v(i, j + 1) - 2.0 * c + w.v(i, j - 1)) * ihy2;
            out.set_v(i, j, lap);
        }
    }
    out
}

/// Neumann Laplacian `div(grad q)` on cell centers (zero flux through walls).
pub fn neumann_laplacian(q: &ScalarField) -> ScalarField {
    divergence(&gradient(q))
}

/// |w|₁² = ⟨−Δ_h w, w⟩ assembled from face differences, including the
/// half-cell differences to the walls.
pub fn h1_semi_sq(w: &VelocityField) -> f64 {
    let g = *w.grid();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let d = w.u(i + 1, j) - w.u(i, j);
            s += d * d * ihx2;
        }
    }
    for i in 1..g.nx {
        for j in 0..g.ny - 1 {
            let d = w.u(i, j + 1) - w.u(i, j);
            s += d * d * ihy2;
        }
        s += 2.0 * (w.u(i, 0).powi(2) + w.u(i, g.ny - 1).powi(2)) * ihy2;
    }
    for i in 0..g.nx {
        for j in 0..g.ny {
            let d = w.v(i, j + 1) - w.v(i, j);
            s += d * d * ihy2;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx - 1 {
            let d = w.v(i + 1, j) - w.v(i, j);
            s += d * d * ihx2;
        }
        s += 2.0 * (w.v(0, j).powi(2) + w.v(g.nx - 1, j).powi(2)) * ihx2;
    }
    s * g.cell_area()
}

/// Visit every advection term `out[p] += coef · (a[a1] + a[a2]) · w[n]`.
///
/// Each control volume exchanges with its four neighbours through faces whose
/// transport velocity is the average of two `a` entries. A flux enters the two
/// volumes it separates with opposite signs, which is what makes the form
/// skew-symmetric. Wall fluxes vanish for admissible `a` and are skipped.
fn for_each_advection_term(
    g: &StaggeredGrid,
    mut term: impl FnMut(usize, usize, usize, usize, f64),
) {
    let (cx, cy) = (0.25 / g.hx(), 0.25 / g.hy());
    for i in 1..g.nx {
        for j in 0..g.ny {
            let p = g.iu(i, j);
            if i + 1 < g.nx {
                term(p, g.iu(i + 1, j), p, g.iu(i + 1, j), cx);
            }
            if i > 1 {
                term(p, g.iu(i - 1, j), g.iu(i - 1, j), p, -cx);
            }
            if j + 1 < g.ny {
                term(p, g.iu(i, j + 1), g.iv(i - 1, j + 1), g.iv(i, j + 1), cy);
            }
            if j > 0 {
                term(p, g.iu(i, j - 1), g.iv(i - 1, j), g.iv(i, j), -cy);
            }
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            let p = g.iv(i, j);
            if i + 1 < g.nx {
                term(p, g.iv(i + 1, j), g.iu(i + 1, j - 1), g.iu(i + 1, j), cx);
            }
            if i > 0 {
                term(p, g.iv(i - 1, j), g.iu(i, j - 1), g.iu(i, j), -cx);
            }
            if j + 1 < g.ny {
                term(p, g.iv(i, j + 1), p, g.iv(i, j + 1), cy);
            }
            if j > 1 {
                term(p, g.iv(i, j - 1), g.iv(i, j - 1), p, -cy);
            }
        }
    }
}

/// Skew-symmetric advection `(a·∇)w + ½(div a) w` on the faces of `w`.
pub fn advect(a: &VelocityField, w: &VelocityField) -> VelocityField {
    let g = *w.grid();
    let mut out = VelocityField::zeros(g);
    let (av, wv) = (a.as_slice(), w.as_slice());
    let o = out.as_mut_slice();
    for_each_advection_term(&g, |p, n, a1, a2, coef| {
        o[p] += coef * (av[a1] + av[a2]) * wv[n];
    });
    out
}

/// The field `t` with `⟨advect(h, w), z⟩ = ⟨h, t⟩` for every admissible `h`.
pub fn advect_transport_adjoint(w: &VelocityField, z: &VelocityField) -> VelocityField {
    let g = *w.grid();
    let mut out = VelocityField::zeros(g);
    let (wv, zv) = (w.as_slice(), z.as_slice());
    let o = out.as_mut_slice();
    for_each_advection_term(&g, |p, n, a1, a2, coef| {
        let c = coef * zv[p] * wv[n];
        o[a1] += c;
        o[a2] += c;
    });
    out.enforce_boundary();
    out
}

/// Discrete trilinear form b(a, w, z) = ⟨advect(a, w), z⟩.
pub fn trilinear(a: &VelocityField, w: &VelocityField, z: &VelocityField) -> f64 {
    advect(a, w).dot(z)
}

/// Maximum |div w| scaled by h / ‖w‖₀ (0 for the zero field).
pub fn divergence_residual(w: &VelocityField) -> f64 {
    let norm = w.l2();
    if norm == 0.0 {
        return 0.0;
    }
    divergence(w).max_abs() * w.grid().h_min() / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> StaggeredGrid {
        StaggeredGrid::new(1.0, 1.5, 12, 10).unwrap()
    }

    #[test]
    fn divergence_of_linear_field() {
        let w = VelocityField::from_fn(grid(), |x, _| x, |_, y| -y);
        // boundary normals are forced to zero, so only interior cells see the exact field
        let d = divergence(&w);
        let g = grid();
        for i in 1..g.nx - 1 {
            for j in 1..g.ny - 1 {
                assert!(d.get(i, j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = grid();
        assert_eq!(
            gradient(&ScalarField::from_fn(g, |_, _| 4.0)).max_abs(),
            0.0
        );
        let gq = gradient(&ScalarField::from_fn(g, |x, _| x));
        for i in 1..g.nx {
            for j in 0..g.ny {
                assert!((gq.u(i, j) - 1.0).abs() < 1e-12);
            }
        }
        assert!(gq.as_slice()[g.n_u()..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_of_linear_field_vanishes_in_interior() {
        let g = grid();
        let w = VelocityField::from_fn(g, |x, y| 1.0 + 2.0 * x - y, |x, y| x + 3.0 * y);
        let l = laplacian(&w);
        for i in 2..g.nx - 1 {
            for j in 1..g.ny - 1 {
                assert!(l.u(i, j).abs() < 1e-9, "{}", l.u(i, j));
            }
        }
    }

    #[test]
    fn h1_matches_laplacian_form() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = VelocityField::random(g, &mut rng);
        let a = h1_semi_sq(&w);
        let b = -laplacian(&w).dot(&w);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn transport_adjoint_identity() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (h, w, z) = (
            VelocityField::random(g, &mut rng),
            VelocityField::random(g, &mut rng),
            VelocityField::random(g, &mut rng),
        );
        let lhs = trilinear(&h, &w, &z);
        let rhs = h.dot(&advect_transport_adjoint(&w, &z));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn advect_zero_field() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = VelocityField::random(g, &mut rng);
        assert_eq!(advect(&a, &VelocityField::zeros(g)).max_abs(), 0.0);
    }
}
