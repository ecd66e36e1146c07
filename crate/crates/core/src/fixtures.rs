//! Canonical model Hamiltonians as hoppings.

use num_complex::Complex64;

use crate::bloch::{BlochSeries, Hoppings, KGrid, PauliVec, SampledLoop};
use crate::invariants::{ClassLabel, LabelKind};
use crate::matrix::Matrix2;

pub fn sigma_x() -> Hoppings {
    Hoppings::onsite("sigma_x", Matrix2::sigma_x())
}

pub fn minus_sigma_x() -> Hoppings {
    Hoppings::onsite("-sigma_x", -Matrix2::sigma_x())
}

pub fn sigma_z() -> Hoppings {
    Hoppings::onsite("sigma_z", Matrix2::sigma_z())
}

pub fn minus_sigma_z() -> Hoppings {
    Hoppings::onsite("-sigma_z", -Matrix2::sigma_z())
}

pub fn sigma_y() -> Hoppings {
    Hoppings::onsite("sigma_y", Matrix2::sigma_y())
}

/// `R_n(k) = [[0, e^{−ink}], [e^{ink}, 0]]`.
pub fn r_n(n: i64) -> Hoppings {
    signed_r(1.0, n)
}

/// `sign · R_n`.
pub fn signed_r(sign: f64, n: i64) -> Hoppings {
    let mut s = BlochSeries::default();
    // H_01 = e^{−ink} sits at j = n, H_10 = e^{ink} at j = −n.
    s.add_at(n, Matrix2::real(0.0, sign, 0.0, 0.0));
    s.add_at(-n, Matrix2::real(0.0, 0.0, sign, 0.0));
    let name = if sign < 0.0 { format!("-R_{n}") } else { format!("R_{n}") };
    s.to_hoppings(name)
}

/// SSH chain with equal hoppings and staggered potential `v`:
/// `H(k) = [[v, 1 + e^{−ik}], [1 + e^{ik}, −v]]`.
pub fn ssh(v: f64) -> Hoppings {
    Hoppings::new(
        format!("ssh(v={v})"),
        [(0, Matrix2::real(v, 1.0, 1.0, -v)), (1, Matrix2::real(0.0, 1.0, 0.0, 0.0))],
    )
}

/// Real Hamiltonian `cos(wk) σ_x + sin(wk) σ_z`, a loop of winding `w` in
/// the x–z plane.
pub fn real_rotor(w: u32) -> Hoppings {
    if w == 0 {
        return Hoppings::onsite("rotor_0", Matrix2::sigma_x());
    }
    let h = Matrix2::new(
        Complex64::new(0.0, 0.5),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, -0.5),
    );
    Hoppings::new(format!("rotor_{w}"), [(0, Matrix2::zero()), (w, h)])
}

/// Hoppings of the representative matrix of a class label.
pub fn representative(label: ClassLabel) -> Hoppings {
    let s = label.sign.value();
    let h = match label.kind {
        LabelKind::SigmaZ => Hoppings::onsite("sigma_z", Matrix2::sigma_z().scale_re(s)),
        LabelKind::SigmaX => Hoppings::onsite("sigma_x", Matrix2::sigma_x().scale_re(s)),
        LabelKind::R(n) => signed_r(s, n),
    };
    let mut h = h;
    h.name = label.to_string();
    h
}

/// The representative loop of a label sampled on `grid`, in closed form.
pub fn representative_loop(label: ClassLabel, grid: KGrid) -> SampledLoop {
    let s = label.sign.value();
    SampledLoop::from_fn(grid, |k| match label.kind {
        LabelKind::SigmaZ => PauliVec::traceless(0.0, 0.0, s),
        LabelKind::SigmaX => PauliVec::traceless(s, 0.0, 0.0),
        LabelKind::R(n) => {
            let (sn, cs) = (n as f64 * k).sin_cos();
            PauliVec::traceless(s * cs, s * sn, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::eval_bloch;

    #[test]
    fn r_n_matches_closed_form() {
        for n in -3..=3 {
            let h = r_n(n);
            for k in [-3.0, -0.4, 0.9, 2.7] {
                let m = eval_bloch(&h, k);
                let want = Matrix2::new(
                    Complex64::new(0.0, 0.0),
                    Complex64::from_polar(1.0, -(n as f64) * k),
                    Complex64::from_polar(1.0, n as f64 * k),
                    Complex64::new(0.0, 0.0),
                );
                assert!((m - want).max_abs() < 1e-14, "n={n} k={k}");
            }
        }
        assert_eq!(r_n(0).range(), 0);
        assert_eq!(r_n(-2).range(), 2);
    }

    #[test]
    fn rotor_is_real_with_unit_norm() {
        let h = real_rotor(3);
        for k in [-2.0, 0.1, 1.3] {
            let m = eval_bloch(&h, k);
            let want = Matrix2::sigma_x().scale_re((3.0 * k).cos()) + Matrix2::sigma_z().scale_re((3.0 * k).sin());
            assert!((m - want).max_abs() < 1e-14);
        }
    }
}
