use nalgebra::DVector;

use super::{project_density, project_simplex, CapacityResult, Optimizer, Settings};
use crate::conic::{AffineExpr, Program, ScalarExpr};
use crate::entrcones::{quantum_cond_entr_hypo, quantum_entr_hypo};
use crate::error::{Error, Result};
use crate::qmat::{
    binary_entropy_bits, c, entropy_exact, is_real, partial_trace, random_density, CMat,
    DensityMatrix, QuantumChannel, C64,
};

/// Classical capacity of the channel `x ↦ Φ(x)`:
/// `max_p H(Σ p(x) Φ(x)) − Σ p(x) H(Φ(x))`.
///
/// The output entropies `H(Φ(x))` are constants and enter exactly.
pub fn cq_capacity(states: &[DensityMatrix], settings: &Settings) -> Result<CapacityResult> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty list of channel outputs".into()))?;
    let n = first.dim();
    if let Some(bad) = states.iter().find(|s| s.dim() != n) {
        return Err(Error::DimensionMismatch(format!(
            "channel outputs have dimensions {n} and {}",
            bad.dim()
        )));
    }
    let mut prog = Program::new();
    let probs: Vec<ScalarExpr> = states.iter().map(|_| prog.scalar_var()).collect();
    for p in &probs {
        prog.add_nonneg(p.clone());
    }
    prog.add_eq(probs.iter().cloned().sum::<ScalarExpr>() - 1.0);

    let mut mixture = AffineExpr::zeros(n, n);
    let mut output_entropy = ScalarExpr::constant(0.0);
    for (p, s) in probs.iter().zip(states) {
        mixture = &mixture + &AffineExpr::from_scalar(p).kron_right(s.matrix());
        output_entropy = output_entropy + p.scale(entropy_exact(s));
    }
    let h = quantum_entr_hypo(&mut prog, &mixture, &settings.scheme)?;
    prog.maximize(h.value - output_entropy);

    let sol = settings.solve(&prog)?;
    let p: Vec<f64> = probs.iter().map(|e| sol.scalar(e)).collect();
    Ok(CapacityResult::new(
        sol.objective,
        Optimizer::Distribution(project_simplex(&p)),
        sol.status,
        settings,
    ))
}

/// `h₂((1+ε)/2)` bits with `ε = |⟨ψ0|ψ1⟩|`: the capacity of the binary
/// pure-state channel.
pub fn cq_capacity_pure_binary_exact(psi0: &DVector<C64>, psi1: &DVector<C64>) -> Result<f64> {
    if psi0.len() != psi1.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            psi0.len(),
            psi1.len()
        )));
    }
    for v in [psi0, psi1] {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "state vector has norm {}",
                v.norm()
            )));
        }
    }
    let eps = psi0.dotc(psi1).norm().min(1.0);
    Ok(binary_entropy_bits((1.0 + eps) / 2.0))
}

/// Stinespring isometry of the amplitude-damping channel,
/// `|0⟩ ↦ |0⟩_B|0⟩_E`, `|1⟩ ↦ √γ |0⟩_B|1⟩_E + √(1−γ) |1⟩_B|0⟩_E`.
pub fn amplitude_damping_isometry(gamma: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "damping parameter {gamma} outside [0, 1]"
        )));
    }
    let mut u = CMat::zeros(4, 2);
    u[(0, 0)] = c(1.0, 0.0);
    u[(1, 1)] = c(gamma.sqrt(), 0.0);
    u[(2, 1)] = c((1.0 - gamma).sqrt(), 0.0);
    QuantumChannel::stinespring(u, 2, 2)
}

fn stinespring_parts(u: &QuantumChannel) -> Result<(&CMat, usize, usize, usize)> {
    match u {
        QuantumChannel::Stinespring {
            iso,
            dim_in,
            dim_out,
            dim_env,
        } => Ok((iso, *dim_in, *dim_out, *dim_env)),
        _ => Err(Error::InvalidChannel(
            "a Stinespring isometry is required".into(),
        )),
    }
}

/// Density-matrix variable, real when the data are real: the objectives here
/// are invariant under complex conjugation of the input, so a real optimizer
/// exists.
fn density_var(prog: &mut Program, n: usize, complex: bool) -> Result<AffineExpr> {
    let rho = prog.matrix_var(n, complex)?;
    prog.add_psd(rho.clone())?;
    prog.add_eq(rho.trace() - 1.0);
    Ok(rho)
}

/// Entanglement-assisted classical capacity `max_ρ H(B|E) + H(B)` evaluated
/// on `UρU*`.
pub fn ea_capacity(channel: &QuantumChannel, settings: &Settings) -> Result<CapacityResult> {
    let (u, din, db, de) = stinespring_parts(channel)?;
    if db * de > settings.ea_dim_cap {
        return Err(Error::DimensionLimit(format!(
            "dim(B)·dim(E) = {} exceeds the cap {}",
            db * de,
            settings.ea_dim_cap
        )));
    }
    let mut prog = Program::new();
    let rho = density_var(&mut prog, din, !is_real(u))?;
    let joint = rho.conjugate_by(u);
    // H(B|E) = H(BE) − H(E): the reference traces out B.
    let cond = quantum_cond_entr_hypo(&mut prog, &joint, [db, de], 1, &settings.scheme)?;
    let out = joint.partial_trace(2, &[db, de])?;
    let hb = quantum_entr_hypo(&mut prog, &out, &settings.scheme)?;
    prog.maximize(cond.value + hb.value);

    let sol = settings.solve(&prog)?;
    let state = project_density(&sol.value(&rho), vec![din])?;
    Ok(CapacityResult::new(
        sol.objective,
        Optimizer::State(state),
        sol.status,
        settings,
    ))
}

const DEGRADABILITY_TOL: f64 = 1e-8;
const DEGRADABILITY_SAMPLES: u64 = 4;

/// Quantum capacity `max_ρ H(F|E')` on `W Φ(ρ) W*`, valid when `W: B -> E'⊗F`
/// is a Stinespring isometry of a degrading map, `Φ^c = Ξ∘Φ`.
///
/// Degradability is checked on random inputs before solving.
pub fn q_capacity_degradable(
    u: &QuantumChannel,
    w: &QuantumChannel,
    settings: &Settings,
) -> Result<CapacityResult> {
    let (uiso, din, db, de) = stinespring_parts(u)?;
    let (wiso, wdin, de2, df) = stinespring_parts(w)?;
    if wdin != db {
        return Err(Error::DimensionMismatch(format!(
            "degrading map takes dimension {wdin}, channel outputs {db}"
        )));
    }
    if de2 != de {
        return Err(Error::DimensionMismatch(format!(
            "degrading map outputs dimension {de2}, environment has {de}"
        )));
    }
    for seed in 0..DEGRADABILITY_SAMPLES {
        let rho = random_density(din, din, 0x5eed + seed)?;
        let joint = uiso * rho.matrix() * uiso.adjoint();
        let complementary = partial_trace(&joint, 1, &[db, de])?;
        let out = partial_trace(&joint, 2, &[db, de])?;
        let degraded = partial_trace(&(wiso * out * wiso.adjoint()), 2, &[de, df])?;
        let defect = (complementary - degraded).camax();
        if defect > DEGRADABILITY_TOL {
            return Err(Error::InvalidChannel(format!(
                "degrading map does not reproduce the complementary channel (defect {defect:.3e})"
            )));
        }
    }

    let mut prog = Program::new();
    let rho = density_var(&mut prog, din, !(is_real(uiso) && is_real(wiso)))?;
    let state = rho
        .conjugate_by(uiso)
        .partial_trace(2, &[db, de])?
        .conjugate_by(wiso);
    // H(F|E') = H(E'F) − H(E'): the reference traces out F.
    let cond = quantum_cond_entr_hypo(&mut prog, &state, [de, df], 2, &settings.scheme)?;
    prog.maximize(cond.value);

    let sol = settings.solve(&prog)?;
    let opt = project_density(&sol.value(&rho), vec![din])?;
    Ok(CapacityResult::new(
        sol.objective,
        Optimizer::State(opt),
        sol.status,
        settings,
    ))
}

pub fn amplitude_damping_ea_capacity(gamma: f64, settings: &Settings) -> Result<CapacityResult> {
    ea_capacity(&amplitude_damping_isometry(gamma)?, settings)
}

/// Quantum capacity of amplitude damping for `γ ≤ 1/2`, where the channel is
/// degraded by amplitude damping with parameter `(1−2γ)/(1−γ)`.
pub fn amplitude_damping_q_capacity(gamma: f64, settings: &Settings) -> Result<CapacityResult> {
    if !(0.0..=0.5).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "amplitude damping is degradable only for γ in [0, 1/2], got {gamma}"
        )));
    }
    let u = amplitude_damping_isometry(gamma)?;
    let w = amplitude_damping_isometry((1.0 - 2.0 * gamma) / (1.0 - gamma))?;
    q_capacity_degradable(&u, &w, settings)
}
