use super::{project_density, ReeResult, Settings};
use crate::conic::{AffineExpr, Program};
use crate::entrcones::quantum_rel_entr_epi;
use crate::error::{Error, Result};
use crate::qmat::{nats_to_bits, DensityMatrix};

/// Relative entropy of entanglement relaxed to PPT states,
/// `min D(ρ‖τ)` over `τ ⪰ 0`, `Tr τ = 1`, `τ^{T_B} ⪰ 0`.
pub fn ree_ppt(rho: &DensityMatrix, dims: [usize; 2], settings: &Settings) -> Result<ReeResult> {
    let n = dims[0] * dims[1];
    if n != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a state of dimension {}",
            rho.dim()
        )));
    }
    let mut prog = Program::new();
    let tau = prog.matrix_var(n, !rho.is_real())?;
    prog.add_psd(tau.clone())?;
    prog.add_psd(tau.partial_transpose(2, &dims)?)?;
    prog.add_eq(tau.trace() - 1.0);
    let d = quantum_rel_entr_epi(
        &mut prog,
        &AffineExpr::constant(rho.matrix().clone()),
        &tau,
        &settings.scheme,
    )?;
    prog.minimize(d.value);

    let sol = settings.solve(&prog)?;
    Ok(ReeResult {
        value_nats: sol.objective,
        value_bits: nats_to_bits(sol.objective),
        tau: project_density(&sol.value(&tau), dims.to_vec())?,
        status: sol.status,
        m: settings.scheme.m(),
        k: settings.scheme.k(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{c, hermitian_eigen, partial_transpose, random_density, rel_entr_exact};
    use nalgebra::DVector;

    fn bell() -> DensityMatrix {
        let s = 0.5f64.sqrt();
        let psi = DVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        DensityMatrix::pure(&psi, vec![2, 2]).unwrap()
    }

    #[test]
    fn bell_state_is_one_bit() {
        let r = ree_ppt(&bell(), [2, 2], &Settings::default()).unwrap();
        assert!((r.value_bits - 1.0).abs() < 1e-5, "{}", r.value_bits);
        // Optimal τ is not unique (dephased and isotropic states both attain
        // it), but every optimum has fidelity 1/2 with the Bell state and is PPT.
        let fidelity = (bell().matrix() * r.tau.matrix()).trace().re;
        assert!((fidelity - 0.5).abs() < 1e-4, "{fidelity}");
        let (pt, _) = hermitian_eigen(&partial_transpose(r.tau.matrix(), 2, &[2, 2]).unwrap());
        assert!(pt[0] > -1e-6);
    }

    #[test]
    fn product_state_is_zero() {
        let a = random_density(2, 2, 1).unwrap();
        let b = random_density(2, 2, 2).unwrap();
        let rho = a.tensor(&b);
        let r = ree_ppt(&rho, [2, 2], &Settings::default()).unwrap();
        assert!(r.value_bits.abs() < 1e-6, "{}", r.value_bits);
    }

    #[test]
    fn random_state_sandwich() {
        let rho = random_density(4, 4, 9)
            .unwrap()
            .with_dims(vec![2, 2])
            .unwrap();
        let r = ree_ppt(&rho, [2, 2], &Settings::default()).unwrap();
        // The maximally mixed state is PPT and feasible.
        let mixed = DensityMatrix::maximally_mixed(vec![2, 2]);
        let upper = nats_to_bits(rel_entr_exact(&rho, &mixed));
        assert!(r.value_bits >= -1e-7);
        assert!(r.value_bits <= upper + 1e-6);
        let (pt, _) = hermitian_eigen(&partial_transpose(r.tau.matrix(), 2, &[2, 2]).unwrap());
        assert!(pt[0] > -1e-6);
    }

    #[test]
    fn dims_must_match() {
        let rho = DensityMatrix::maximally_mixed(vec![4]);
        assert!(ree_ppt(&rho, [2, 3], &Settings::default()).is_err());
    }
}
