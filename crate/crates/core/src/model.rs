//! The model-step contract and the run loop.

use thiserror::Error;

use crate::rng::RngStream;
use crate::series::{PriceSeries, SeriesError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("price became non-finite ({0})")]
    NonFinitePrice(f64),
    #[error("price became non-positive ({0})")]
    NonPositivePrice(f64),
    #[error("market clearing failed: {0}")]
    Clearing(String),
}

impl ModelError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("run aborted at tick {tick}: {source}")]
    Aborted {
        tick: u64,
        #[source]
        source: ModelError,
        /// Records produced before the failing tick.
        completed: usize,
    },
}

/// One simulation step of a market model.
pub trait Model {
    /// Names of the per-tick observables, fixed for the lifetime of the model.
    fn observable_names(&self) -> Vec<String>;

    /// Current price.
    fn price(&self) -> f64;

    /// Advances one tick. Clears `out` and fills it with one value per
    /// observable name, in order.
    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError>;

    /// Run-level counters worth recording next to the output, such as how
    /// often a rate had to be clipped.
    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn observable_names(&self) -> Vec<String> {
        (**self).observable_names()
    }

    fn price(&self) -> f64 {
        (**self).price()
    }

    fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
        (**self).step(rng, out)
    }

    fn diagnostics(&self) -> Vec<(&'static str, f64)> {
        (**self).diagnostics()
    }
}

/// A single tick's view into a [`Trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<'a> {
    pub t: u64,
    pub price: f64,
    pub observables: Vec<(&'a str, f64)>,
}

impl StepRecord<'_> {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.observables
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
    }
}

/// Column-oriented record of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub names: Vec<String>,
    pub ticks: Vec<u64>,
    pub prices: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl Trace {
    fn with_names(names: Vec<String>, capacity: usize) -> Self {
        let columns = names.iter().map(|_| Vec::with_capacity(capacity)).collect();
        Self {
            names,
            ticks: Vec::with_capacity(capacity),
            prices: Vec::with_capacity(capacity),
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn record(&self, i: usize) -> StepRecord<'_> {
        StepRecord {
            t: self.ticks[i],
            price: self.prices[i],
            observables: self
                .names
                .iter()
                .zip(&self.columns)
                .map(|(n, c)| (n.as_str(), c[i]))
                .collect(),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = StepRecord<'_>> + '_ {
        (0..self.len()).map(move |i| self.record(i))
    }

    pub fn price_series(&self) -> Result<PriceSeries, SeriesError> {
        PriceSeries::new(self.prices.clone(), self.ticks.first().copied().unwrap_or(0) as i64)
    }

    fn push(&mut self, t: u64, price: f64, values: &[f64]) {
        self.ticks.push(t);
        self.prices.push(price);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
    }
}

/// Steps `model` exactly `steps` times, recording one entry per tick.
///
/// A non-finite price aborts the run with the tick index; prices are never clamped.
pub fn run_model<M: Model + ?Sized>(
    model: &mut M,
    steps: u64,
    rng: &mut RngStream,
) -> Result<Trace, RunError> {
    run_model_with(model, steps, rng, |_| {})
}

/// Like [`run_model`], calling `inspect` with each record as it is stored.
pub fn run_model_with<M, F>(
    model: &mut M,
    steps: u64,
    rng: &mut RngStream,
    inspect: F,
) -> Result<Trace, RunError>
where
    M: Model + ?Sized,
    F: FnMut(&StepRecord<'_>),
{
    match drive(model, steps, rng, inspect) {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run_model`], but hands back the records produced before an abort
/// together with the error.
pub fn run_model_partial<M: Model + ?Sized>(
    model: &mut M,
    steps: u64,
    rng: &mut RngStream,
) -> (Trace, Option<RunError>) {
    drive(model, steps, rng, |_| {})
}

fn drive<M, F>(model: &mut M, steps: u64, rng: &mut RngStream, mut inspect: F) -> (Trace, Option<RunError>)
where
    M: Model + ?Sized,
    F: FnMut(&StepRecord<'_>),
{
    let names = model.observable_names();
    let mut trace = Trace::with_names(names, steps.min(1 << 24) as usize);
    if steps == 0 {
        return (trace, Some(RunError::NoSteps));
    }
    let mut buf = Vec::with_capacity(trace.names.len());
    for t in 1..=steps {
        let abort = |source, completed| RunError::Aborted {
            tick: t,
            source,
            completed,
        };
        if let Err(e) = model.step(rng, &mut buf) {
            let completed = trace.len();
            return (trace, Some(abort(e, completed)));
        }
        let price = model.price();
        if !price.is_finite() {
            let completed = trace.len();
            return (trace, Some(abort(ModelError::NonFinitePrice(price), completed)));
        }
        debug_assert_eq!(buf.len(), trace.names.len());
        trace.push(t, price, &buf);
        let i = trace.len() - 1;
        inspect(&trace.record(i));
    }
    (trace, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian random walk with a switch to blow up at a given tick.
    struct Walk {
        p: f64,
        blow_up_at: Option<u64>,
        t: u64,
    }

    impl Model for Walk {
        fn observable_names(&self) -> Vec<String> {
            vec!["noise".into()]
        }
        fn price(&self) -> f64 {
            self.p
        }
        fn step(&mut self, rng: &mut RngStream, out: &mut Vec<f64>) -> Result<(), ModelError> {
            self.t += 1;
            let z = rng.standard_normal();
            self.p += z;
            if self.blow_up_at == Some(self.t) {
                self.p = f64::INFINITY;
            }
            out.clear();
            out.push(z);
            Ok(())
        }
    }

    fn walk() -> Walk {
        Walk {
            p: 100.0,
            blow_up_at: None,
            t: 0,
        }
    }

    #[test]
    fn one_step_one_record() {
        let trace = run_model(&mut walk(), 1, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.record(0).t, 1);
        assert!(trace.record(0).get("noise").is_some());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = run_model(&mut walk(), 500, &mut RngStream::new(9, 2)).unwrap();
        let b = run_model(&mut walk(), 500, &mut RngStream::new(9, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_steps_rejected() {
        assert_eq!(
            run_model(&mut walk(), 0, &mut RngStream::new(1, 0)),
            Err(RunError::NoSteps)
        );
    }

    #[test]
    fn non_finite_price_aborts_with_tick() {
        let mut m = walk();
        m.blow_up_at = Some(7);
        let err = run_model(&mut m, 20, &mut RngStream::new(1, 0)).unwrap_err();
        match err {
            RunError::Aborted {
                tick, completed, ..
            } => {
                assert_eq!(tick, 7);
                assert_eq!(completed, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_run_keeps_prefix() {
        let mut m = walk();
        m.blow_up_at = Some(7);
        let (trace, err) = run_model_partial(&mut m, 20, &mut RngStream::new(1, 0));
        assert_eq!(trace.len(), 6);
        assert_eq!(trace.ticks.last(), Some(&6));
        assert!(matches!(err, Some(RunError::Aborted { tick: 7, .. })));
        let (trace, err) = run_model_partial(&mut walk(), 5, &mut RngStream::new(1, 0));
        assert_eq!((trace.len(), err), (5, None));
    }
}
