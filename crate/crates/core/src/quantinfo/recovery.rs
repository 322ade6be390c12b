use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{RecoveryResult, Settings};
use crate::conic::{AffineExpr, Program};
use crate::entrcones::quantum_rel_entr_epi;
use crate::error::{Error, Result};
use crate::qmat::{
    apply_choi, c, entropy_exact, identity, nats_to_bits, random_pure, CMat, DensityMatrix,
};

/// Margin in bits above which `rer > cmi` counts as a violation. It sits
/// well above the combined solver and quadrature error (about 1e-5).
pub const VIOLATION_MARGIN_BITS: f64 = 1e-4;

fn tripartite(rho: &DensityMatrix, dims: [usize; 3]) -> Result<DensityMatrix> {
    if dims.iter().product::<usize>() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} do not match a state of dimension {}",
            rho.dim()
        )));
    }
    rho.clone().with_dims(dims.to_vec())
}

/// Conditional mutual information `I(A:C|B) = H(BC) + H(AB) − H(ABC) − H(B)`
/// in bits, from exact spectra.
pub fn cmi(rho: &DensityMatrix, dims: [usize; 3]) -> Result<f64> {
    let rho = tripartite(rho, dims)?;
    let h = |keep: &[usize]| -> Result<f64> { Ok(entropy_exact(&rho.marginal(keep)?)) };
    let nats = h(&[2, 3])? + h(&[1, 2])? - entropy_exact(&rho) - h(&[2])?;
    Ok(nats_to_bits(nats))
}

/// `|ψ⟩ = (|0⟩_B|00⟩_AC + |1⟩_B(cos θ|01⟩_AC + sin θ|10⟩_AC))/√2`, stored in
/// the order (A, B, C).
pub fn counterexample_state(theta: f64) -> Result<DensityMatrix> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "angle {theta} outside [0, π/2]"
        )));
    }
    let s = 0.5f64.sqrt();
    let mut psi = DVector::from_element(8, c(0.0, 0.0));
    // Index a·4 + b·2 + c.
    psi[0] = c(s, 0.0);
    psi[3] = c(s * theta.cos(), 0.0);
    psi[6] = c(s * theta.sin(), 0.0);
    DensityMatrix::pure(&psi, vec![2, 2, 2])
}

/// `(id_A ⊗ Λ_J)(ρ_AB)` as a linear function of a Choi matrix `J` on
/// `B_in ⊗ (B⊗C)_out`: the `(a, a')` block of the output is `Λ_J(ρ_{aa'})`.
fn extended_channel(j: &CMat, blocks: &[Vec<CMat>], nb: usize, nout: usize) -> Result<CMat> {
    let na = blocks.len();
    let mut out = CMat::zeros(na * nout, na * nout);
    for (a, row) in blocks.iter().enumerate() {
        for (a2, blk) in row.iter().enumerate() {
            let img = apply_choi(j, blk, nb, nout)?;
            out.view_mut((a * nout, a2 * nout), (nout, nout))
                .copy_from(&img);
        }
    }
    Ok(out)
}

/// `min_Λ D(ρ_ABC ‖ (id_A ⊗ Λ)(ρ_AB))` over channels `Λ: B -> B⊗C`, reported
/// with the exact conditional mutual information.
pub fn rel_entr_recovery(
    rho: &DensityMatrix,
    dims: [usize; 3],
    settings: &Settings,
) -> Result<RecoveryResult> {
    let rho = tripartite(rho, dims)?;
    let [na, nb, nc] = dims;
    if na * nb * nc > settings.recovery_dim_cap {
        return Err(Error::DimensionLimit(format!(
            "n_A·n_B·n_C = {} exceeds the cap {}",
            na * nb * nc,
            settings.recovery_dim_cap
        )));
    }
    let cmi_bits = cmi(&rho, dims)?;
    let rho_ab = rho.partial_trace(3)?;
    let blocks: Vec<Vec<CMat>> = (0..na)
        .map(|a| {
            (0..na)
                .map(|a2| {
                    rho_ab
                        .matrix()
                        .view((a * nb, a2 * nb), (nb, nb))
                        .into_owned()
                })
                .collect()
        })
        .collect();
    let nout = nb * nc;

    let mut prog = Program::new();
    let j = prog.matrix_var(nb * nout, !rho.is_real())?;
    prog.add_psd(j.clone())?;
    prog.add_eq_matrix(&j.partial_trace(2, &[nb, nout])?, &identity(nb))?;
    let sigma = j.try_map(|m| extended_channel(m, &blocks, nb, nout))?;
    let d = quantum_rel_entr_epi(
        &mut prog,
        &AffineExpr::constant(rho.matrix().clone()),
        &sigma,
        &settings.scheme,
    )?;
    prog.minimize(d.value);

    let sol = settings.solve(&prog)?;
    let rer_bits = nats_to_bits(sol.objective);
    Ok(RecoveryResult {
        cmi_bits,
        rer_bits,
        choi: sol.value(&j),
        violation: rer_bits > cmi_bits + VIOLATION_MARGIN_BITS,
        status: sol.status,
        m: settings.scheme.m(),
        k: settings.scheme.k(),
    })
}

/// Seed of task `index` under `seed`: one ChaCha stream per task, so results
/// do not depend on scheduling.
pub fn task_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// `(cmi_bits, rer_bits)` for `count` Haar-random pure states on `dims`.
pub fn recovery_scatter(
    count: usize,
    seed: u64,
    dims: [usize; 3],
    settings: &Settings,
) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let rho = random_pure(&dims, task_seed(seed, i));
            let r = rel_entr_recovery(&rho, dims, settings)?;
            Ok((r.cmi_bits, r.rer_bits))
        })
        .collect()
}
