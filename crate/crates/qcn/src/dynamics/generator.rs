//! Compiled master-equation generator.
//!
//! [`Generator::compile`] flattens a [`GeneratorBundle`] into sparse
//! matrices and rate closures so the right-hand side can be evaluated with
//! sparse-dense kernels only. The same compiled form can be materialized as
//! a dense superoperator for steady-state solves of static generators.

use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::DensityMatrix;
use crate::model::{GeneratorBundle, Rate};
use crate::sparse::CsrMatrix;

use super::DynamicsError;

struct Channel {
    rate: Rate,
    op: CsrMatrix,
    op_dag: CsrMatrix,
    opdag_op: CsrMatrix,
}

struct Network {
    rate: Rate,
    source: CsrMatrix,
    source_dag: CsrMatrix,
    sink: CsrMatrix,
    sink_dag: CsrMatrix,
    /// T†S — dressed loss of the joint field.
    sinkdag_source: CsrMatrix,
    /// S†T.
    sourcedag_sink: CsrMatrix,
}

enum Coef {
    One,
    Fn(crate::model::ScheduleFn),
}

impl Coef {
    fn at(&self, t: f64) -> f64 {
        match self {
            Coef::One => 1.0,
            Coef::Fn(f) => f(t),
        }
    }
}

/// Scratch buffer for RHS evaluation.
pub struct RhsWorkspace {
    tmp: Array2<C64>,
}

impl RhsWorkspace {
    pub fn new(dim: usize) -> Self {
        Self { tmp: Array2::zeros((dim, dim)) }
    }
}

pub struct Generator {
    dim: usize,
    h_terms: Vec<(Coef, CsrMatrix)>,
    channels: Vec<Channel>,
    networks: Vec<Network>,
    time_independent: bool,
}

impl Generator {
    pub fn compile(bundle: &GeneratorBundle) -> Self {
        let dim = bundle.layout().total_dim();
        let mut h_terms = Vec::new();
        h_terms.push((Coef::One, bundle.h_static.csr().clone()));
        for (f, op) in &bundle.h_schedule {
            h_terms.push((Coef::Fn(f.clone()), op.csr().clone()));
        }
        let channels = bundle
            .lindblad
            .iter()
            .map(|term| {
                let op = term.op.csr().clone();
                let op_dag = op.adjoint();
                let opdag_op = op_dag.matmul(&op);
                Channel { rate: term.rate.clone(), op, op_dag, opdag_op }
            })
            .collect();
        let networks = bundle
            .network
            .iter()
            .map(|term| {
                let source = term.source.csr().clone();
                let sink = term.sink.csr().clone();
                let source_dag = source.adjoint();
                let sink_dag = sink.adjoint();
                Network {
                    rate: term.rate_product.clone(),
                    sinkdag_source: sink_dag.matmul(&source),
                    sourcedag_sink: source_dag.matmul(&sink),
                    source,
                    source_dag,
                    sink,
                    sink_dag,
                }
            })
            .collect();
        Self {
            dim,
            h_terms,
            channels,
            networks,
            time_independent: bundle.is_time_independent(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    /// dρ/dt at time `t`, accumulated into `out`.
    ///
    /// −i[H(t), ρ]
    /// + Σ Γ(t)/2 · (2 OρO† − O†Oρ − ρO†O)
    /// + Σ r(t) · (SρT† + TρS† − T†Sρ − ρS†T)
    ///
    /// The network form is the unidirectional source→sink coupling whose
    /// retro-reflected port is √κ_src S + √κ_sink T.
    pub fn rhs_into(&self, t: f64, rho: &Array2<C64>, out: &mut Array2<C64>, ws: &mut RhsWorkspace) {
        let zero = C64::new(0.0, 0.0);
        out.fill(zero);
        for (coef, h) in &self.h_terms {
            let c = coef.at(t);
            if c == 0.0 {
                continue;
            }
            h.acc_mul_left(rho, C64::new(0.0, -c), out);
            h.acc_mul_right(rho, C64::new(0.0, c), out);
        }
        for ch in &self.channels {
            let gamma = ch.rate.at(t);
            if gamma == 0.0 {
                continue;
            }
            ch.op.mul_left_into(rho, &mut ws.tmp);
            ch.op_dag.acc_mul_right(&ws.tmp, C64::new(gamma, 0.0), out);
            ch.opdag_op.acc_mul_left(rho, C64::new(-0.5 * gamma, 0.0), out);
            ch.opdag_op.acc_mul_right(rho, C64::new(-0.5 * gamma, 0.0), out);
        }
        for net in &self.networks {
            let r = net.rate.at(t);
            if r == 0.0 {
                continue;
            }
            let rc = C64::new(r, 0.0);
            net.source.mul_left_into(rho, &mut ws.tmp);
            net.sink_dag.acc_mul_right(&ws.tmp, rc, out);
            net.sink.mul_left_into(rho, &mut ws.tmp);
            net.source_dag.acc_mul_right(&ws.tmp, rc, out);
            net.sinkdag_source.acc_mul_left(rho, -rc, out);
            net.sourcedag_sink.acc_mul_right(rho, -rc, out);
        }
    }

    pub fn rhs(&self, t: f64, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        let mut ws = RhsWorkspace::new(self.dim);
        self.rhs_into(t, rho, &mut out, &mut ws);
        out
    }

    /// Frobenius norm of dρ/dt; the steady-state residual.
    pub fn residual(&self, t: f64, rho: &Array2<C64>) -> f64 {
        self.rhs(t, rho).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Dense superoperator L with row-major vectorization,
    /// (dρ/dt)[i,j] = Σ L[(i·d+j, k·d+l)] ρ[k,l]. Static generators only.
    pub(crate) fn superoperator(&self) -> Result<Mat<C64>, DynamicsError> {
        if !self.time_independent {
            return Err(DynamicsError::TimeDependentGenerator);
        }
        let d = self.dim;
        let n = d * d;
        let mut m: Mat<C64> = Mat::zeros(n, n);
        let id = CsrMatrix::identity(d);

        // coef · (A ρ B) contributes coef·A[i,k]·B[l,j] at (i·d+j, k·d+l)
        let mut add_apb = |a: &CsrMatrix, b: &CsrMatrix, coef: C64| {
            for (i, k, va) in a.iter() {
                for (l, j, vb) in b.iter() {
                    m[(i * d + j, k * d + l)] += coef * va * vb;
                }
            }
        };

        for (coef, h) in &self.h_terms {
            let c = coef.at(0.0);
            add_apb(h, &id, C64::new(0.0, -c));
            add_apb(&id, h, C64::new(0.0, c));
        }
        for ch in &self.channels {
            let gamma = ch.rate.at(0.0);
            add_apb(&ch.op, &ch.op_dag, C64::new(gamma, 0.0));
            add_apb(&ch.opdag_op, &id, C64::new(-0.5 * gamma, 0.0));
            add_apb(&id, &ch.opdag_op, C64::new(-0.5 * gamma, 0.0));
        }
        for net in &self.networks {
            let r = C64::new(net.rate.at(0.0), 0.0);
            add_apb(&net.source, &net.sink_dag, r);
            add_apb(&net.sink, &net.source_dag, r);
            add_apb(&net.sinkdag_source, &id, -r);
            add_apb(&id, &net.sourcedag_sink, -r);
        }
        Ok(m)
    }
}

/// dρ/dt for a density matrix under a generator bundle.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    bundle: &GeneratorBundle,
    t: f64,
) -> Result<Array2<C64>, DynamicsError> {
    if rho.layout() != bundle.layout() && !std::sync::Arc::ptr_eq(rho.layout(), bundle.layout()) {
        return Err(DynamicsError::LayoutMismatch);
    }
    Ok(Generator::compile(bundle).rhs(t, rho.matrix()))
}
