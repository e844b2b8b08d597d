//! Attack orchestration: single-image digital attacks, transform-robust
//! attacks, and prediction stabilization, all reported with full query
//! accounting and per-evaluation traces.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::geometry::{rasterize, Polygon, RegionMask};
use crate::pso::{minimize, Evaluation, OptimizationResult, SwarmConfig};
use crate::raster::RasterImage;
use crate::shadow::{apply_shadow_in_region, ShadowSpec};
use crate::transforms::{expected_confidences, sample_plan, TransformPlan};

/// How the shadow coefficient is chosen: a fixed value, or measured from a
/// reference shadow before the attack (resolved by the caller, e.g. the CLI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KChoice {
    Fixed(f64),
    Measure,
}

impl KChoice {
    fn value(self) -> Result<f64> {
        match self {
            KChoice::Fixed(k) => Ok(k),
            KChoice::Measure => Err(Error::UnresolvedK),
        }
    }
}

/// Attack parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub k: KChoice,
    /// Polygon edge count (equals its vertex count), at least 3.
    pub edges: usize,
    pub swarm: SwarmConfig,
    pub use_eot: bool,
    pub stabilize: bool,
    /// Cap on classifier queries for one attack call.
    pub query_budget: Option<u64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            k: KChoice::Fixed(crate::shadow::DEFAULT_K),
            edges: 3,
            swarm: SwarmConfig::default(),
            use_eot: false,
            stabilize: false,
            query_budget: None,
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if self.edges < 3 {
            return Err(Error::InvalidConfig(format!(
                "polygon needs at least 3 edges, got {}",
                self.edges
            )));
        }
        if self.query_budget == Some(0) {
            return Err(Error::InvalidConfig("query budget must be positive".into()));
        }
        Ok(())
    }
}

/// One cost evaluation in the trace: its cost and the best cost seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub cost: f64,
    pub best: f64,
}

/// The outcome of one attack call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub success: bool,
    pub original_label: usize,
    pub adversarial_label: Option<usize>,
    pub winning_spec: Option<ShadowSpec>,
    pub queries_used: u64,
    pub restarts_used: usize,
    pub stabilized_confidence: Option<f64>,
    pub trace: Vec<TraceEntry>,
}

/// Vertex-coordinate search box: the image rectangle expanded by 20% per
/// side, so shadows can enter partially from outside the frame.
pub fn vertex_bounds(width: usize, height: usize, edges: usize) -> Vec<(f64, f64)> {
    let w = width as f64;
    let h = height as f64;
    let mut bounds = Vec::with_capacity(edges * 2);
    for _ in 0..edges {
        bounds.push((-0.2 * w, 1.2 * w));
        bounds.push((-0.2 * h, 1.2 * h));
    }
    bounds
}

struct SearchState {
    trace: Vec<TraceEntry>,
    best: f64,
    queries: u64,
    stop_label: Option<usize>,
}

impl SearchState {
    fn new() -> Self {
        Self { trace: Vec::new(), best: f64::INFINITY, queries: 0, stop_label: None }
    }

    fn record(&mut self, cost: f64) {
        self.best = self.best.min(cost);
        self.trace.push(TraceEntry { cost, best: self.best });
    }

    fn charge(&mut self, queries: u64, budget: Option<u64>) -> Result<()> {
        match budget {
            Some(b) if self.queries + queries > b => Err(Error::BudgetExhausted { budget: b }),
            _ => {
                self.queries += queries;
                Ok(())
            }
        }
    }
}

fn finish(
    outcome: Result<OptimizationResult>,
    state: SearchState,
    original_label: usize,
    k: f64,
    mask: &RegionMask,
    total_restarts: usize,
) -> Result<AttackReport> {
    let mut report = AttackReport {
        success: false,
        original_label,
        adversarial_label: None,
        winning_spec: None,
        queries_used: state.queries,
        restarts_used: total_restarts,
        stabilized_confidence: None,
        trace: state.trace,
    };
    match outcome {
        Ok(r) if r.early_exit => {
            report.success = true;
            report.adversarial_label = state.stop_label;
            report.winning_spec = Some(ShadowSpec::new(
                Polygon::from_flat(&r.best_position)?,
                k,
                mask.clone(),
            )?);
            report.restarts_used = r.restart_index + 1;
            Ok(report)
        }
        Ok(_) => Ok(report),
        Err(Error::PsoAborted { partial, source }) => match *source {
            // running out of queries is an unsuccessful attack, not an error
            Error::BudgetExhausted { .. } => {
                report.restarts_used = partial.restart_index + 1;
                Ok(report)
            }
            other => Err(other),
        },
        Err(other) => Err(other),
    }
}

/// Minimize the true-class confidence over triangle (or `edges`-gon) vertex
/// coordinates until the predicted label flips. An input the classifier
/// already misclassifies is an immediate success with one query.
pub fn attack_digital<C: Classifier + ?Sized>(
    image: &RasterImage,
    y_true: usize,
    mask: &RegionMask,
    classifier: &C,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    cfg.validate()?;
    let k = cfg.k.value()?;
    let mut state = SearchState::new();
    state.charge(1, cfg.query_budget)?;
    let clean = classifier.predict(image)?;
    if clean.argmax() != y_true {
        return Ok(AttackReport {
            success: true,
            original_label: y_true,
            adversarial_label: Some(clean.argmax()),
            winning_spec: None,
            queries_used: state.queries,
            restarts_used: 0,
            stabilized_confidence: None,
            trace: state.trace,
        });
    }

    let bounds = vertex_bounds(image.width(), image.height(), cfg.edges);
    let cell = RefCell::new(state);
    let outcome = minimize(
        |position| {
            let mut st = cell.borrow_mut();
            st.charge(1, cfg.query_budget)?;
            let poly = Polygon::from_flat(position)?;
            let region = rasterize(&poly, mask);
            let shadowed = apply_shadow_in_region(image, &region, k);
            let conf = classifier.predict(&shadowed)?;
            let cost = conf.get(y_true);
            let stop = conf.argmax() != y_true;
            if stop {
                st.stop_label = Some(conf.argmax());
            }
            st.record(cost);
            Ok(Evaluation { cost, stop })
        },
        &bounds,
        &cfg.swarm,
    );
    finish(outcome, cell.into_inner(), y_true, k, mask, cfg.swarm.restarts)
}

/// Transform-robust variant: the cost is the plan-mean true-class confidence
/// (one query per plan item per evaluation) and success requires the
/// plan-mean argmax to differ from the true label. The initial
/// misclassification check uses the same plan-mean predicate.
pub fn attack_robust<C: Classifier + ?Sized>(
    image: &RasterImage,
    y_true: usize,
    mask: &RegionMask,
    classifier: &C,
    cfg: &AttackConfig,
    plan_seed: u64,
) -> Result<AttackReport> {
    let plan = sample_plan(plan_seed);
    attack_robust_with_plan(image, y_true, mask, classifier, cfg, &plan)
}

/// [`attack_robust`] with a caller-supplied frozen plan.
pub fn attack_robust_with_plan<C: Classifier + ?Sized>(
    image: &RasterImage,
    y_true: usize,
    mask: &RegionMask,
    classifier: &C,
    cfg: &AttackConfig,
    plan: &TransformPlan,
) -> Result<AttackReport> {
    cfg.validate()?;
    let k = cfg.k.value()?;
    let mut state = SearchState::new();

    state.charge(plan.len() as u64, cfg.query_budget)?;
    let clean_mean = expected_confidences(|_| image.clone(), plan, classifier)?;
    if argmax(&clean_mean) != y_true {
        return Ok(AttackReport {
            success: true,
            original_label: y_true,
            adversarial_label: Some(argmax(&clean_mean)),
            winning_spec: None,
            queries_used: state.queries,
            restarts_used: 0,
            stabilized_confidence: None,
            trace: state.trace,
        });
    }

    let bounds = vertex_bounds(image.width(), image.height(), cfg.edges);
    let cell = RefCell::new(state);
    let outcome = minimize(
        |position| {
            let mut st = cell.borrow_mut();
            st.charge(plan.len() as u64, cfg.query_budget)?;
            let poly = Polygon::from_flat(position)?;
            let region = rasterize(&poly, mask);
            let mean = expected_confidences(
                |k_mult| apply_shadow_in_region(image, &region, scaled_k(k, k_mult)),
                plan,
                classifier,
            )?;
            let cost = mean[y_true];
            let stop = argmax(&mean) != y_true;
            if stop {
                st.stop_label = Some(argmax(&mean));
            }
            st.record(cost);
            Ok(Evaluation { cost, stop })
        },
        &bounds,
        &cfg.swarm,
    );
    finish(outcome, cell.into_inner(), y_true, k, mask, cfg.swarm.restarts)
}

/// Second-stage search that maximizes the plan-mean confidence of the wrong
/// label an earlier attack induced, subject to that label staying the
/// plan-mean argmax. Infeasible candidates cost infinity; if none becomes
/// feasible the stabilization fails but the unstabilized shadow stands.
pub fn stabilize<C: Classifier + ?Sized>(
    image: &RasterImage,
    mask: &RegionMask,
    classifier: &C,
    wrong_label: usize,
    cfg: &AttackConfig,
    plan_seed: u64,
) -> Result<AttackReport> {
    cfg.validate()?;
    let k = cfg.k.value()?;
    let plan = sample_plan(plan_seed);
    let mut state = SearchState::new();

    state.charge(1, cfg.query_budget)?;
    let original_label = classifier.predict(image)?.argmax();

    let bounds = vertex_bounds(image.width(), image.height(), cfg.edges);
    let cell = RefCell::new(state);
    let outcome = minimize(
        |position| {
            let mut st = cell.borrow_mut();
            st.charge(plan.len() as u64, cfg.query_budget)?;
            let poly = Polygon::from_flat(position)?;
            let region = rasterize(&poly, mask);
            let mean = expected_confidences(
                |k_mult| apply_shadow_in_region(image, &region, scaled_k(k, k_mult)),
                &plan,
                classifier,
            )?;
            let cost = if argmax(&mean) == wrong_label {
                -mean[wrong_label]
            } else {
                f64::INFINITY
            };
            st.record(cost);
            Ok(Evaluation::cost_only(cost))
        },
        &bounds,
        &cfg.swarm,
    );

    let state = cell.into_inner();
    match outcome {
        Ok(r) => {
            let feasible = r.best_cost.is_finite();
            Ok(AttackReport {
                success: feasible,
                original_label,
                adversarial_label: feasible.then_some(wrong_label),
                winning_spec: if feasible {
                    Some(ShadowSpec::new(
                        Polygon::from_flat(&r.best_position)?,
                        k,
                        mask.clone(),
                    )?)
                } else {
                    None
                },
                queries_used: state.queries,
                restarts_used: cfg.swarm.restarts,
                stabilized_confidence: feasible.then_some(-r.best_cost),
                trace: state.trace,
            })
        }
        Err(Error::PsoAborted { partial, source }) => match *source {
            Error::BudgetExhausted { .. } => Ok(AttackReport {
                success: false,
                original_label,
                adversarial_label: None,
                winning_spec: None,
                queries_used: state.queries,
                restarts_used: partial.restart_index + 1,
                stabilized_confidence: None,
                trace: state.trace,
            }),
            other => Err(other),
        },
        Err(other) => Err(other),
    }
}

fn scaled_k(k: f64, multiplier: f64) -> f64 {
    (k * multiplier).clamp(f64::MIN_POSITIVE, 1.0)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ConfidenceVector, QueryCounter};
    use crate::color::RgbPixel;
    use crate::shadow::apply_shadow;
    use crate::transforms::TransformItem;

    /// Class 0 confidence tracks the mean in-mask lightness, quantized to
    /// 1/64 steps so that plan means of identical queries stay bit-exact.
    struct LightnessOracle {
        mask: RegionMask,
        counter: QueryCounter,
    }

    impl LightnessOracle {
        fn new(mask: RegionMask) -> Self {
            Self { mask, counter: QueryCounter::new() }
        }
    }

    impl Classifier for LightnessOracle {
        fn classes(&self) -> usize {
            2
        }
        fn predict(&self, image: &RasterImage) -> crate::error::Result<ConfidenceVector> {
            self.counter.increment();
            let mut sum = 0.0;
            let mut n = 0u64;
            for (x, y) in self.mask.iter_set() {
                sum += crate::color::rgb_to_lab(image.pixel(x, y)).l;
                n += 1;
            }
            let c = ((sum / n as f64 / 100.0).clamp(0.0, 1.0) * 64.0).round() / 64.0;
            ConfidenceVector::new(vec![c, 1.0 - c])
        }
        fn queries(&self) -> u64 {
            self.counter.count()
        }
    }

    /// Always predicts class 0 with full margin.
    struct StubbornOracle(QueryCounter);

    impl Classifier for StubbornOracle {
        fn classes(&self) -> usize {
            2
        }
        fn predict(&self, _: &RasterImage) -> crate::error::Result<ConfidenceVector> {
            self.0.increment();
            ConfidenceVector::new(vec![1.0, 0.0])
        }
        fn queries(&self) -> u64 {
            self.0.count()
        }
    }

    fn bright_image() -> RasterImage {
        RasterImage::filled(16, 16, RgbPixel::new(150, 150, 150))
    }

    fn small_cfg() -> AttackConfig {
        AttackConfig {
            swarm: SwarmConfig { swarm_size: 12, max_iters: 30, restarts: 2, seed: 5, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn lightness_oracle_falls_to_dark_triangles() {
        let mask = RegionMask::full(16, 16);
        let oracle = LightnessOracle::new(mask.clone());
        let img = bright_image();
        let cfg = small_cfg();
        let report = attack_digital(&img, 0, &mask, &oracle, &cfg).unwrap();
        assert!(report.success);
        assert_eq!(report.adversarial_label, Some(1));
        assert_ne!(report.adversarial_label, Some(report.original_label));
        let spec = report.winning_spec.as_ref().expect("winning spec");
        assert!((spec.k - crate::shadow::DEFAULT_K).abs() < 1e-12);

        // report/classifier agreement: replaying the winning spec flips again
        let adv = apply_shadow(&img, spec);
        assert_eq!(oracle.predict(&adv).unwrap().argmax(), 1);

        // query accounting matches the oracle's own counter minus the replay
        assert_eq!(report.queries_used, oracle.queries() - 1);
        assert!(!report.trace.is_empty());
    }

    #[test]
    fn stubborn_oracle_exhausts_full_budget() {
        let mask = RegionMask::full(8, 8);
        let oracle = StubbornOracle(QueryCounter::new());
        let cfg = AttackConfig {
            swarm: SwarmConfig { swarm_size: 4, max_iters: 3, restarts: 2, seed: 1, ..Default::default() },
            ..Default::default()
        };
        let report = attack_digital(&bright_image(), 0, &mask, &oracle, &cfg).unwrap();
        assert!(!report.success);
        assert!(report.winning_spec.is_none());
        // 1 clean check + swarm * (iters + 1) * restarts
        assert_eq!(report.queries_used, 1 + 4 * 4 * 2);
        assert_eq!(report.restarts_used, 2);
        let costs_nonincreasing = report.trace.windows(2).all(|w| w[1].best <= w[0].best);
        assert!(costs_nonincreasing);
    }

    #[test]
    fn already_misclassified_is_immediate_success() {
        // the clean prediction is already class 1, not the claimed class 0
        struct Contrarian(QueryCounter);
        impl Classifier for Contrarian {
            fn classes(&self) -> usize {
                2
            }
            fn predict(&self, _: &RasterImage) -> crate::error::Result<ConfidenceVector> {
                self.0.increment();
                ConfidenceVector::new(vec![0.1, 0.9])
            }
            fn queries(&self) -> u64 {
                self.0.count()
            }
        }
        let oracle = Contrarian(QueryCounter::new());
        let mask = RegionMask::full(8, 8);
        let report = attack_digital(&bright_image(), 0, &mask, &oracle, &small_cfg()).unwrap();
        assert!(report.success);
        assert_eq!(report.queries_used, 1);
        assert!(report.winning_spec.is_none());
        assert_eq!(report.adversarial_label, Some(1));
        assert_eq!(report.restarts_used, 0);
    }

    #[test]
    fn budget_exhaustion_is_reported_not_raised() {
        let mask = RegionMask::full(8, 8);
        let oracle = StubbornOracle(QueryCounter::new());
        let cfg = AttackConfig { query_budget: Some(10), ..small_cfg() };
        let report = attack_digital(&bright_image(), 0, &mask, &oracle, &cfg).unwrap();
        assert!(!report.success);
        assert_eq!(report.queries_used, 10);
        assert_eq!(oracle.queries(), 10);
        assert_eq!(report.trace.len(), 9);
    }

    #[test]
    fn eot_identity_plan_matches_digital_choices() {
        let mask = RegionMask::full(16, 16);
        let img = bright_image();
        let cfg = small_cfg();

        let digital_oracle = LightnessOracle::new(mask.clone());
        let digital = attack_digital(&img, 0, &mask, &digital_oracle, &cfg).unwrap();

        let robust_oracle = LightnessOracle::new(mask.clone());
        let plan = TransformPlan::from_items(vec![TransformItem::identity(); 11]);
        let robust =
            attack_robust_with_plan(&img, 0, &mask, &robust_oracle, &cfg, &plan).unwrap();

        assert_eq!(digital.success, robust.success);
        assert_eq!(digital.adversarial_label, robust.adversarial_label);
        assert_eq!(robust.queries_used, 11 * digital.queries_used);
    }

    #[test]
    fn eot_attack_succeeds_under_mild_jitter() {
        let mask = RegionMask::full(16, 16);
        let oracle = LightnessOracle::new(mask.clone());
        // brightness jitter only; lightness cost stays monotone in shadow area
        let items = (0..11)
            .map(|i| TransformItem {
                brightness: (i as f64 - 5.0) * 0.02,
                ..TransformItem::identity()
            })
            .collect();
        let plan = TransformPlan::from_items(items);
        let report =
            attack_robust_with_plan(&bright_image(), 0, &mask, &oracle, &small_cfg(), &plan)
                .unwrap();
        assert!(report.success);
    }

    #[test]
    fn eot_queries_are_multiples_of_plan_length() {
        let mask = RegionMask::full(8, 8);
        let oracle = StubbornOracle(QueryCounter::new());
        let cfg = AttackConfig {
            swarm: SwarmConfig { swarm_size: 3, max_iters: 2, restarts: 1, seed: 0, ..Default::default() },
            ..Default::default()
        };
        let report = attack_robust(&bright_image(), 0, &mask, &oracle, &cfg, 7).unwrap();
        assert!(!report.success);
        assert_eq!(report.queries_used % 11, 0);
    }

    #[test]
    fn stabilize_reports_constant_oracle_confidence() {
        struct Wrong(QueryCounter);
        impl Classifier for Wrong {
            fn classes(&self) -> usize {
                3
            }
            fn predict(&self, _: &RasterImage) -> crate::error::Result<ConfidenceVector> {
                self.0.increment();
                ConfidenceVector::new(vec![0.05, 0.9, 0.05])
            }
            fn queries(&self) -> u64 {
                self.0.count()
            }
        }
        let mask = RegionMask::full(8, 8);
        let oracle = Wrong(QueryCounter::new());
        let cfg = AttackConfig {
            swarm: SwarmConfig { swarm_size: 3, max_iters: 2, restarts: 1, seed: 0, ..Default::default() },
            ..Default::default()
        };
        let report = stabilize(&bright_image(), &mask, &oracle, 1, &cfg, 0).unwrap();
        assert!(report.success);
        let stabilized = report.stabilized_confidence.unwrap();
        assert!((stabilized - 0.9).abs() < 1e-9);
        assert_eq!(report.adversarial_label, Some(1));
    }

    #[test]
    fn stabilize_grows_the_shadow_when_confidence_tracks_area() {
        // wrong-label confidence rises with shadow darkness/area
        let mask = RegionMask::full(16, 16);
        let img = bright_image();
        let cfg = AttackConfig {
            swarm: SwarmConfig { swarm_size: 12, max_iters: 25, restarts: 2, seed: 9, ..Default::default() },
            ..Default::default()
        };

        let oracle = LightnessOracle::new(mask.clone());
        let first = attack_digital(&img, 0, &mask, &oracle, &cfg).unwrap();
        assert!(first.success);
        let wrong = first.adversarial_label.unwrap();

        let stab = stabilize(&img, &mask, &oracle, wrong, &cfg, 3).unwrap();
        assert!(stab.success);
        let first_area = first.winning_spec.as_ref().unwrap().region().count();
        let stab_area = stab.winning_spec.as_ref().unwrap().region().count();
        assert!(
            stab_area >= first_area,
            "stabilized area {stab_area} < first-flip area {first_area}"
        );
    }

    #[test]
    fn stabilize_fails_when_label_unreachable() {
        let mask = RegionMask::full(8, 8);
        let oracle = StubbornOracle(QueryCounter::new());
        let cfg = AttackConfig {
            swarm: SwarmConfig { swarm_size: 3, max_iters: 2, restarts: 1, seed: 0, ..Default::default() },
            ..Default::default()
        };
        let report = stabilize(&bright_image(), &mask, &oracle, 1, &cfg, 0).unwrap();
        assert!(!report.success);
        assert!(report.stabilized_confidence.is_none());
        assert!(report.winning_spec.is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mask = RegionMask::full(8, 8);
        let oracle = StubbornOracle(QueryCounter::new());
        let bad_edges = AttackConfig { edges: 2, ..Default::default() };
        assert!(attack_digital(&bright_image(), 0, &mask, &oracle, &bad_edges).is_err());
        let unresolved = AttackConfig { k: KChoice::Measure, ..Default::default() };
        assert!(attack_digital(&bright_image(), 0, &mask, &oracle, &unresolved).is_err());
    }

    #[test]
    fn more_edges_still_succeed() {
        let mask = RegionMask::full(16, 16);
        let oracle = LightnessOracle::new(mask.clone());
        let cfg = AttackConfig { edges: 9, ..small_cfg() };
        let report = attack_digital(&bright_image(), 0, &mask, &oracle, &cfg).unwrap();
        assert!(report.success);
        assert_eq!(report.winning_spec.unwrap().polygon.vertices().len(), 9);
    }
}
