//! Self-checks behind the `gradcheck` and `micheck` commands.

use std::sync::Arc;
use std::time::Instant;

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::autodiff::{finite_diff_check, Matrix, OpKind, Tape, Var, COSINE_EPS};
use crate::error::{Error, Result};
use crate::graph::{generate_sbm, gcn_normalize, Graph, SbmConfig};
use crate::losses::{
    divergence_loss, gaussian_mi, mi_from_mse, mi_from_mse_approx, minimal_loss, neighbor_loss,
    structure_loss_edges, structure_loss_features,
};
use crate::seed::{self, derived_rng};
use crate::trainer::{bsg_objective, initial_params, sample_epoch_inputs, ParamVars, Pretext, TrainConfig, TrainingContext};

/// Pass threshold on the maximum relative error of every component.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub h: f64,
    pub seed: u64,
    /// Op whose backward rule is sign-flipped, to confirm failures surface.
    pub fault: Option<OpKind>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub component: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub coordinates: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub h: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_fault: Option<&'static str>,
    pub components: Vec<ComponentCheck>,
    pub passed: bool,
    pub elapsed_ms: f64,
}

type Loss<'a> = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var> + 'a>;

/// Uniform values in `[lo, hi)` whose magnitude is at least `gap`, so that
/// kinks at zero stay farther than any finite-difference step.
fn random_matrix(rng: &mut seed::Rng, rows: usize, cols: usize, lo: f64, hi: f64, gap: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| loop {
            let v = rng.random_range(lo..hi);
            if v.abs() >= gap {
                break v;
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// `Σ out ∘ R` with a fixed random `R`, so every output coordinate carries a
/// distinct weight into the checked scalar.
fn weighted_sum(tape: &mut Tape, out: Var, r: &Matrix) -> Result<Var> {
    let w = tape.constant(r.clone());
    let prod = tape.mul(out, w)?;
    tape.sum(prod)
}

struct Case<'a> {
    name: &'static str,
    params: Vec<Matrix>,
    loss: Loss<'a>,
}

fn op_case(
    rng: &mut seed::Rng,
    name: &'static str,
    params: Vec<Matrix>,
    out_shape: (usize, usize),
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
) -> Case<'static> {
    let r = random_matrix(rng, out_shape.0, out_shape.1, -1.0, 1.0, 0.0);
    Case {
        name,
        params,
        loss: Box::new(move |t, v| {
            let out = f(t, v)?;
            weighted_sum(t, out, &r)
        }),
    }
}

fn op_cases(seed: u64) -> Vec<Case<'static>> {
    let mut rng = derived_rng(seed, "gradcheck-ops", 0);
    let rng = &mut rng;
    let sparse = Arc::clone(
        gcn_normalize(&[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], 4)
            .expect("valid edges")
            .matrix(),
    );
    let mut m = |r, c| random_matrix(rng, r, c, -1.0, 1.0, 0.0);
    let (a34, b34, a34b, b42, d43) = (m(3, 4), m(3, 4), m(3, 4), m(4, 2), m(4, 3));
    let (c34, e34, f34, g34, h34) = (m(3, 4), m(3, 4), m(3, 4), m(3, 4), m(3, 4));
    let (s1, s2, s3) = (m(3, 4), m(3, 4), m(3, 4));
    let (cos_a, cos_b, gather, scale) = (m(4, 3), m(4, 3), m(3, 4), m(3, 4));
    let relu_in = random_matrix(rng, 3, 4, -1.0, 1.0, 0.05);
    let log_in = random_matrix(rng, 3, 4, 0.5, 2.0, 0.0);
    let clamp_in = Matrix::from_vec(3, 4, vec![-0.9, -0.2, 0.1, 0.7, 0.3, -0.6, 0.8, 0.0, -0.3, 0.45, -0.75, 0.2])
        .expect("shape matches data");

    vec![
        op_case(rng, "matmul", vec![a34, b42], (3, 2), |t, v| t.matmul(v[0], v[1])),
        op_case(rng, "spmm", vec![d43], (4, 3), move |t, v| t.spmm(&sparse, v[0])),
        op_case(rng, "add", vec![b34, a34b], (3, 4), |t, v| t.add(v[0], v[1])),
        op_case(rng, "sub", vec![c34, e34], (3, 4), |t, v| t.sub(v[0], v[1])),
        op_case(rng, "mul", vec![f34, g34], (3, 4), |t, v| t.mul(v[0], v[1])),
        op_case(rng, "mul_scalar", vec![h34], (3, 4), |t, v| t.mul_scalar(v[0], -1.7)),
        op_case(rng, "add_scalar", vec![s1], (3, 4), |t, v| {
            let shifted = t.add_scalar(v[0], 0.3)?;
            t.square(shifted)
        }),
        op_case(rng, "relu", vec![relu_in], (3, 4), |t, v| t.relu(v[0])),
        op_case(rng, "sigmoid", vec![s2], (3, 4), |t, v| t.sigmoid(v[0])),
        op_case(rng, "log", vec![log_in], (3, 4), |t, v| t.log(v[0])),
        op_case(rng, "square", vec![s3.clone()], (3, 4), |t, v| t.square(v[0])),
        op_case(rng, "clamp", vec![clamp_in], (3, 4), |t, v| t.clamp(v[0], -0.5, 0.5)),
        op_case(rng, "sum", vec![s3.clone()], (1, 1), |t, v| {
            let sq = t.square(v[0])?;
            t.sum(sq)
        }),
        op_case(rng, "mean", vec![s3.clone()], (1, 1), |t, v| {
            let sq = t.square(v[0])?;
            t.mean(sq)
        }),
        op_case(rng, "row_sum", vec![s3], (3, 1), |t, v| t.row_sum(v[0])),
        op_case(rng, "cosine_rows", vec![cos_a, cos_b], (4, 1), |t, v| {
            t.cosine_rows(v[0], v[1], COSINE_EPS)
        }),
        op_case(rng, "gather_rows", vec![gather], (5, 4), |t, v| t.gather_rows(v[0], vec![2, 0, 2, 1, 0])),
        op_case(rng, "scale_rows", vec![scale], (3, 4), |t, v| t.scale_rows(v[0], vec![0.5, -2.0, 0.0])),
    ]
}

/// The 12-node two-block fixture used for the full-objective checks.
pub fn gradcheck_graph(seed: u64) -> Result<Graph> {
    generate_sbm(&SbmConfig {
        blocks: 2,
        nodes_per_block: 6,
        p_in: 0.6,
        p_out: 0.1,
        feature_dim: 5,
        feature_noise: 0.5,
        seed,
    })
}

/// Small model and loss weights large enough that every term moves the total.
pub fn gradcheck_config(seed: u64, pretext: Pretext) -> TrainConfig {
    TrainConfig {
        lambda1: 0.3,
        lambda2: 0.2,
        lambda3: 0.5,
        margin: -0.2,
        hidden: 6,
        emb_dim: 4,
        decoder_hidden: 3,
        seed,
        pretext,
        ..TrainConfig::default()
    }
}

fn loss_cases(graph: &Graph, seed: u64) -> Result<Vec<Case<'_>>> {
    let mut cases = Vec::new();
    for pretext in [Pretext::EdgeRecon, Pretext::FeatureRecon] {
        let cfg = gradcheck_config(seed, pretext);
        let ctx = TrainingContext::new(graph)?;
        let inputs = sample_epoch_inputs(&ctx, &cfg, seed::derive_seed(seed, "gradcheck-inputs", 0))?;
        let params: Vec<Matrix> = initial_params(&cfg, graph.feature_dim())?
            .tensors()
            .into_iter()
            .cloned()
            .collect();
        let weights = cfg.weights();
        let name = match pretext {
            Pretext::EdgeRecon => "bsg_total:edge_recon",
            Pretext::FeatureRecon => "bsg_total:feature_recon",
        };
        cases.push(Case {
            name,
            params,
            loss: Box::new(move |t, v| {
                let vars = ParamVars::from_slice(v)?;
                Ok(bsg_objective(t, &ctx, &inputs, vars, &weights)?.total)
            }),
        });
    }

    // Each loss term on its own, with embeddings as the free parameters.
    let n = graph.num_nodes();
    let mean_op = Arc::new(graph.mean_operator());
    let active = graph.active_mask();
    let mut rng = derived_rng(seed, "gradcheck-losses", 0);
    let z = random_matrix(&mut rng, n, 4, -1.0, 1.0, 0.0);
    let z_other = random_matrix(&mut rng, n, 4, -1.0, 1.0, 0.0);
    {
        let (mean_op, active) = (Arc::clone(&mean_op), active.clone());
        cases.push(Case {
            name: "loss:neighbor",
            params: vec![z.clone()],
            loss: Box::new(move |t, v| {
                let zn = t.spmm(&mean_op, v[0])?;
                neighbor_loss(t, v[0], zn, &active)
            }),
        });
    }
    cases.push(Case {
        name: "loss:minimal",
        params: vec![z.clone(), z_other.clone()],
        loss: Box::new(|t, v| minimal_loss(t, v[0], v[1])),
    });
    {
        let (mean_op, active) = (Arc::clone(&mean_op), active.clone());
        cases.push(Case {
            name: "loss:divergence",
            params: vec![z.clone()],
            loss: Box::new(move |t, v| {
                let zn = t.spmm(&mean_op, v[0])?;
                divergence_loss(t, v[0], zn, -0.2, &active)
            }),
        });
    }
    let pos = graph.undirected_edges();
    let neg: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| !graph.has_edge(u, v))
        .take(pos.len())
        .collect();
    let v1 = random_matrix(&mut rng, 4, 3, -1.0, 1.0, 0.0);
    let v2 = random_matrix(&mut rng, 3, 1, -1.0, 1.0, 0.0);
    cases.push(Case {
        name: "loss:structure_edges",
        params: vec![z.clone(), v1, v2],
        loss: Box::new(move |t, v| structure_loss_edges(t, v[0], &pos, &neg, v[1], v[2])),
    });
    let x = graph.features().clone();
    let feat_dec = random_matrix(&mut rng, 4, x.cols(), -1.0, 1.0, 0.0);
    cases.push(Case {
        name: "loss:structure_features",
        params: vec![z, feat_dec],
        loss: Box::new(move |t, v| {
            let xc = t.constant(x.clone());
            structure_loss_features(t, v[0], &[0, 3, 4, 9], xc, v[1])
        }),
    });
    Ok(cases)
}

/// Runs the finite-difference oracle over every op and over the full
/// objective on the 12-node fixture, for both pretexts.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if !(cfg.h > 0.0 && cfg.h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step h = {} must be positive", cfg.h)));
    }
    let started = Instant::now();
    let graph = gradcheck_graph(cfg.seed)?;
    let mut cases = op_cases(cfg.seed);
    cases.extend(loss_cases(&graph, cfg.seed)?);

    let mut components = Vec::with_capacity(cases.len());
    for case in cases {
        let fault = cfg.fault;
        let loss = &case.loss;
        let check = finite_diff_check(&case.params, cfg.h, |t, v| {
            if let Some(kind) = fault {
                t.inject_fault(kind);
            }
            loss(t, v)
        })?;
        components.push(ComponentCheck {
            component: case.name.to_string(),
            max_rel_error: check.max_rel_error,
            max_abs_error: check.max_abs_error,
            coordinates: check.coordinates,
            passed: check.max_rel_error < GRADCHECK_TOLERANCE,
        });
    }
    Ok(GradcheckReport {
        h: cfg.h,
        tolerance: GRADCHECK_TOLERANCE,
        injected_fault: cfg.fault.map(OpKind::name),
        passed: components.iter().all(|c| c.passed),
        components,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Pass threshold on the relative error of the MSE-derived information.
pub const MICHECK_TOLERANCE: f64 = 0.02;
/// Absolute tolerance (nats) for the independent case, where MI is zero.
pub const MICHECK_INDEPENDENCE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MiCheckConfig {
    pub rhos: Vec<f64>,
    pub dims: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for MiCheckConfig {
    fn default() -> Self {
        Self {
            rhos: vec![0.5, 0.8, 0.9, 0.95],
            dims: vec![1, 8, 64],
            samples: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiRow {
    pub rho: f64,
    pub d: usize,
    pub mse: f64,
    pub empirical_mi: f64,
    pub analytic_mi: f64,
    pub abs_error: f64,
    /// Absent when the analytic value is zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationRow {
    pub mse_over_d: f64,
    pub exact: f64,
    pub approx: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiCheckReport {
    pub samples: usize,
    pub tolerance: f64,
    pub rows: Vec<MiRow>,
    pub independence: Vec<MiRow>,
    pub approximation: Vec<ApproximationRow>,
    pub passed: bool,
    pub elapsed_ms: f64,
}

/// Mean of `‖x − y‖²` over `samples` draws with `x ~ N(0, I_d)` and
/// `y = ρx + √(1−ρ²)·ε`, so each coordinate pair has correlation `ρ`.
pub fn empirical_mse(rho: f64, d: usize, samples: usize, rng: &mut seed::Rng) -> f64 {
    let noise = (1.0 - rho * rho).sqrt();
    let mut total = 0.0;
    for _ in 0..samples {
        let mut sq = 0.0;
        for _ in 0..d {
            let x: f64 = StandardNormal.sample(rng);
            let e: f64 = StandardNormal.sample(rng);
            let diff = x - (rho * x + noise * e);
            sq += diff * diff;
        }
        total += sq;
    }
    total / samples as f64
}

fn mi_row(rho: f64, d: usize, cfg: &MiCheckConfig, index: u64) -> Result<MiRow> {
    let mut rng = derived_rng(cfg.seed, "micheck", index);
    let mse = empirical_mse(rho, d, cfg.samples, &mut rng);
    let empirical_mi = mi_from_mse(mse, d)?;
    let analytic_mi = gaussian_mi(rho, d);
    let abs_error = (empirical_mi - analytic_mi).abs();
    let rel_error = (analytic_mi != 0.0).then(|| abs_error / analytic_mi.abs());
    let passed = match rel_error {
        Some(r) => r < MICHECK_TOLERANCE,
        None => abs_error < MICHECK_INDEPENDENCE_TOLERANCE,
    };
    Ok(MiRow {
        rho,
        d,
        mse,
        empirical_mi,
        analytic_mi,
        abs_error,
        rel_error,
        passed,
    })
}

/// Monte-Carlo check of the MSE-to-information identity, an independence
/// control at `ρ = 0`, and a table of how far the small-MSE approximation
/// drifts from the exact form.
pub fn run_micheck(cfg: &MiCheckConfig) -> Result<MiCheckReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("micheck needs at least one sample".into()));
    }
    if let Some(r) = cfg.rhos.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("correlation {r} outside [0, 1)")));
    }
    if cfg.dims.contains(&0) {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let started = Instant::now();
    let mut index = 0;
    let mut rows = Vec::new();
    for &rho in &cfg.rhos {
        for &d in &cfg.dims {
            rows.push(mi_row(rho, d, cfg, index)?);
            index += 1;
        }
    }
    let mut independence = Vec::new();
    for &d in &cfg.dims {
        independence.push(mi_row(0.0, d, cfg, index)?);
        index += 1;
    }
    let approximation = [0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5]
        .into_iter()
        .map(|r| {
            let exact = mi_from_mse(r, 1)?;
            let approx = mi_from_mse_approx(r, 1)?;
            Ok(ApproximationRow {
                mse_over_d: r,
                exact,
                approx,
                rel_gap: (approx - exact).abs() / exact.abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MiCheckReport {
        samples: cfg.samples,
        tolerance: MICHECK_TOLERANCE,
        passed: rows.iter().chain(&independence).all(|r| r.passed),
        rows,
        independence,
        approximation,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_passes_and_detects_faults() {
        let report = run_gradcheck(&GradcheckConfig::default()).unwrap();
        for c in &report.components {
            assert!(c.passed, "{c:?}");
        }
        let faulty = run_gradcheck(&GradcheckConfig {
            fault: Some(OpKind::Sigmoid),
            ..GradcheckConfig::default()
        })
        .unwrap();
        assert!(!faulty.passed);
        let failed: Vec<_> = faulty.components.iter().filter(|c| !c.passed).map(|c| c.component.as_str()).collect();
        assert!(failed.contains(&"sigmoid"), "{failed:?}");
        assert!(failed.contains(&"bsg_total:edge_recon"), "{failed:?}");
    }

    #[test]
    fn gradcheck_rejects_zero_step() {
        assert!(run_gradcheck(&GradcheckConfig {
            h: 0.0,
            ..GradcheckConfig::default()
        })
        .is_err());
    }

    #[test]
    fn small_micheck() {
        let report = run_micheck(&MiCheckConfig {
            rhos: vec![0.9],
            dims: vec![1, 8],
            samples: 50_000,
            seed: 3,
        })
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.rel_error.unwrap() < 0.05, "{row:?}");
        }
        assert!(report.independence.iter().all(|r| r.abs_error < 0.01));
        let gaps: Vec<f64> = report.approximation.iter().map(|r| r.rel_gap).collect();
        assert!(gaps.windows(2).all(|w| w[0] <= w[1]), "{gaps:?}");
    }
}
