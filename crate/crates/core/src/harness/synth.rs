//! Synthetic case studies with analytic ground truth.
//!
//! Both oracles are monotone in every premise of their bundled rules, and the
//! invariance tolerances bound the largest output change their radii allow,
//! so a campaign against the oracle itself can never find an adversarial
//! example.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMeta, Schema};
use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::model::PredictiveModel;
use crate::physreg::{Assign, AugmentationRule, Edit};
use crate::rulespace::{
    Breakpoint, CmpOp, Condition, ConditionalLimit, Envelope, Expectation, PairConstraint, Premise, Radius,
    SensitivityRule, Trend,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseName {
    LiftBalance,
    HeatBalance,
}

impl CaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::LiftBalance => "lift-balance",
            CaseName::HeatBalance => "heat-balance",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lift-balance" => Ok(CaseName::LiftBalance),
            "heat-balance" => Ok(CaseName::HeatBalance),
            other => Err(invalid(format!("unknown synthetic case `{other}`"))),
        }
    }
}

// lift-balance: AoA = K1·W/CAS² − K2·Flap − K3·Slat
pub const LIFT_K1: f64 = 2000.0;
pub const LIFT_K2: f64 = 0.8;
pub const LIFT_K3: f64 = 1.5;

/// Column indices of the lift-balance inputs.
pub mod lift {
    pub const CAS: usize = 0;
    pub const ACWT: usize = 1;
    pub const ALT: usize = 2;
    pub const SLAT: usize = 3;
    pub const FLAP: usize = 4;
}

// heat-balance: T = TAT + (TWR − TAT)·sigmoid(A·PWR + B·ALT − C·TAS − E·AoA + offset)
pub const HEAT_A: f64 = 0.08;
pub const HEAT_B: f64 = 4e-5;
pub const HEAT_C: f64 = 0.01;
pub const HEAT_E: f64 = 0.1;
pub const HEAT_OFFSETS: [f64; 2] = [-1.0, -1.5];

/// Column indices of the heat-balance inputs.
pub mod heat {
    pub const AOA: usize = 0;
    pub const TAS: usize = 1;
    pub const ALT: usize = 2;
    pub const PWR: usize = 3;
    pub const TWR: usize = 4;
    pub const TAT: usize = 5;
    pub const SLAT: usize = 6;
    pub const FLAP: usize = 7;
    pub const WAI: usize = 8;
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Noise-free ground truth of a synthetic case; `flipped` negates it, which
/// breaks every directional rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    pub case: CaseName,
    pub flipped: bool,
}

impl Oracle {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = match self.case {
            CaseName::LiftBalance => {
                let cas = x[lift::CAS];
                vec![LIFT_K1 * x[lift::ACWT] / (cas * cas) - LIFT_K2 * x[lift::FLAP] - LIFT_K3 * x[lift::SLAT]]
            }
            CaseName::HeatBalance => {
                let z = HEAT_A * x[heat::PWR] + HEAT_B * x[heat::ALT] - HEAT_C * x[heat::TAS] - HEAT_E * x[heat::AOA];
                let (tat, twr) = (x[heat::TAT], x[heat::TWR]);
                HEAT_OFFSETS.iter().map(|o| tat + (twr - tat) * sigmoid(z + o)).collect()
            }
        };
        if self.flipped {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        y
    }
}

impl PredictiveModel for Oracle {
    fn input_dim(&self) -> usize {
        match self.case {
            CaseName::LiftBalance => 5,
            CaseName::HeatBalance => 9,
        }
    }

    fn output_dim(&self) -> usize {
        match self.case {
            CaseName::LiftBalance => 1,
            CaseName::HeatBalance => 2,
        }
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: batch.cols(),
            });
        }
        let rows: Vec<Vec<f64>> = batch.iter_rows().map(|r| self.eval(r)).collect();
        Matrix::from_rows(&rows, self.output_dim())
    }
}

/// Everything bundled with a synthetic case besides its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub name: CaseName,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub schema: Schema,
    pub rules: Vec<SensitivityRule>,
    pub envelope: Envelope,
    pub augmentation: Vec<AugmentationRule>,
}

impl SyntheticCase {
    pub fn oracle(&self) -> Oracle {
        Oracle {
            case: self.name,
            flipped: false,
        }
    }

    pub fn flipped_oracle(&self) -> Oracle {
        Oracle {
            case: self.name,
            flipped: true,
        }
    }
}

fn premise(feature: usize, trend: Trend) -> Premise {
    Premise { feature, trend }
}

fn flip(t: Trend) -> Trend {
    match t {
        Trend::Increase => Trend::Decrease,
        Trend::Decrease => Trend::Increase,
    }
}

fn mirrored(id: &str, premises: &[(usize, Trend)], targets: Vec<usize>, tol: f64) -> [SensitivityRule; 2] {
    let up: Vec<Premise> = premises.iter().map(|&(f, t)| premise(f, t)).collect();
    let down: Vec<Premise> = premises.iter().map(|&(f, t)| premise(f, flip(t))).collect();
    [
        SensitivityRule::directional(format!("{id}-incr"), up, Expectation::Increase, targets.clone(), tol),
        SensitivityRule::directional(format!("{id}-decr"), down, Expectation::Decrease, targets, tol),
    ]
}

fn lift_case() -> (Schema, Vec<SensitivityRule>, Envelope) {
    use lift::*;
    let schema = Schema {
        features: vec![
            FeatureMeta::real("CAS", 100.0, 340.0, 1.0),
            FeatureMeta::real("ACWT", 30.0, 45.0, 0.2),
            FeatureMeta::real("ALT", 0.0, 40000.0, 100.0),
            FeatureMeta::dichotomous("Slat"),
            FeatureMeta::categorical("Flap", ["0", "10", "20", "30"]),
        ],
        targets: vec!["AoA".into()],
    };
    let [mut r0, mut r1] = mirrored(
        "r",
        &[
            (CAS, Trend::Decrease),
            (ACWT, Trend::Increase),
            (FLAP, Trend::Decrease),
            (SLAT, Trend::Decrease),
        ],
        vec![0],
        0.1,
    );
    r0.id = "r0".into();
    r1.id = "r1".into();
    // |∂y/∂CAS|·1 + |∂y/∂W|·0.2 ≤ 0.18 + 0.04 over the whole range
    let r2 = SensitivityRule::invariant(
        "r2",
        vec![Radius { feature: CAS, radius: 1.0 }, Radius { feature: ACWT, radius: 0.2 }],
        vec![0],
        0.3,
    );
    let bp = |a, lower, upper| Breakpoint { a, lower, upper };
    let envelope = Envelope {
        pairs: vec![PairConstraint::new(
            "alt-cas",
            ALT,
            CAS,
            vec![bp(0.0, 100.0, 340.0), bp(20000.0, 120.0, 320.0), bp(40000.0, 180.0, 260.0)],
        )
        .expect("static breakpoints")],
        limits: vec![
            ConditionalLimit {
                id: "flap-speed".into(),
                when: vec![Condition::new(FLAP, CmpOp::Gt, 0.0)],
                feature: CAS,
                min: None,
                max: Some(220.0),
            },
            ConditionalLimit {
                id: "slat-speed".into(),
                when: vec![Condition::eq(SLAT, 1.0)],
                feature: CAS,
                min: None,
                max: Some(250.0),
            },
        ],
    };
    (schema, vec![r0, r1, r2], envelope)
}

fn heat_case() -> (Schema, Vec<SensitivityRule>, Envelope, Vec<AugmentationRule>) {
    use heat::*;
    let schema = Schema {
        features: vec![
            FeatureMeta::real("AoA", -2.0, 12.0, 0.1),
            FeatureMeta::real("TAS", 0.0, 350.0, 1.0),
            FeatureMeta::real("ALT", 0.0, 35000.0, 100.0),
            FeatureMeta::real("PWR", 0.0, 60.0, 0.5),
            FeatureMeta::real("TWR", -40.0, 160.0, 0.5),
            FeatureMeta::real("TAT", -40.0, 40.0, 0.5),
            FeatureMeta::dichotomous("SLAT"),
            FeatureMeta::categorical("FLAP", ["0", "10", "20", "30"]),
            FeatureMeta::dichotomous("WAI"),
        ],
        targets: vec!["Tskin_a".into(), "Tskin_b".into()],
    };
    let on = Condition::eq(WAI, 1.0);
    let off = Condition::eq(WAI, 0.0);
    let [r3, r4] = mirrored(
        "r",
        &[
            (ALT, Trend::Increase),
            (TWR, Trend::Increase),
            (PWR, Trend::Increase),
            (TAT, Trend::Increase),
            (TAS, Trend::Decrease),
            (AOA, Trend::Decrease),
        ],
        vec![0, 1],
        0.5,
    );
    // OFF: TWR stays within 2.5 of TAT, so the TWR/TAS/ALT bands move y by < 0.51
    let [r5, r6] = mirrored(
        "r",
        &[(TAT, Trend::Increase), (PWR, Trend::Increase), (AOA, Trend::Decrease)],
        vec![0, 1],
        0.6,
    );
    let name = |mut r: SensitivityRule, id: &str, c: &Condition| {
        r.id = id.into();
        r.when(c.clone())
    };
    // temperatures move ≤ 0.5; the sigmoid moves ≤ 0.016 times TWR − TAT ≤ 200
    let r7 = SensitivityRule::invariant(
        "r7",
        vec![
            Radius { feature: ALT, radius: 100.0 },
            Radius { feature: TWR, radius: 0.5 },
            Radius { feature: PWR, radius: 0.5 },
            Radius { feature: TAT, radius: 0.5 },
            Radius { feature: TAS, radius: 1.0 },
            Radius { feature: AOA, radius: 0.1 },
        ],
        vec![0, 1],
        4.0,
    );
    let rules = vec![
        name(r3, "r3", &on),
        name(r4, "r4", &on),
        name(r5, "r5", &off),
        name(r6, "r6", &off),
        r7,
    ];
    let bp = |a, lower, upper| Breakpoint { a, lower, upper };
    let envelope = Envelope {
        pairs: vec![
            PairConstraint::new("twr-above-tat", TAT, TWR, vec![bp(-40.0, -40.0, 160.0), bp(40.0, 40.0, 160.0)])
                .expect("static breakpoints"),
            PairConstraint::new("alt-tas", ALT, TAS, vec![bp(0.0, 0.0, 350.0), bp(35000.0, 150.0, 350.0)])
                .expect("static breakpoints"),
        ],
        limits: vec![],
    };
    let both = |assign| vec![Edit { index: 0, assign }, Edit { index: 1, assign }];
    let augmentation = vec![
        AugmentationRule {
            id: "A1".into(),
            when: vec![on.clone()],
            range: Some((-10.0, 10.0)),
            inputs: vec![
                Edit { index: TAT, assign: Assign::ShiftByT },
                Edit { index: TWR, assign: Assign::ShiftByT },
            ],
            targets: both(Assign::ShiftByT),
        },
        AugmentationRule {
            id: "A2".into(),
            when: vec![on.clone()],
            range: None,
            inputs: vec![Edit { index: PWR, assign: Assign::Value(0.0) }],
            targets: both(Assign::Feature(TAT)),
        },
        AugmentationRule {
            id: "A3".into(),
            when: vec![on],
            range: None,
            inputs: vec![Edit { index: TAS, assign: Assign::Value(0.0) }],
            targets: both(Assign::Feature(TWR)),
        },
        AugmentationRule {
            id: "A4".into(),
            when: vec![off],
            range: None,
            inputs: vec![Edit { index: TWR, assign: Assign::Feature(TAT) }],
            targets: both(Assign::Feature(TAT)),
        },
    ];
    (schema, rules, envelope, augmentation)
}

fn sample_lift<R: Rng>(rng: &mut R) -> Vec<f64> {
    vec![
        rng.gen_range(100.0..340.0),
        rng.gen_range(30.0..45.0),
        rng.gen_range(0.0..40000.0),
        f64::from(rng.gen_bool(0.3) as u8),
        rng.gen_range(0..4) as f64,
    ]
}

fn sample_heat<R: Rng>(rng: &mut R) -> Vec<f64> {
    let wai_on = rng.gen_bool(0.5);
    let tat: f64 = rng.gen_range(-40.0..30.0);
    let (pwr, twr) = if wai_on {
        (rng.gen_range(10.0..60.0), (tat + rng.gen_range(40.0..120.0)).min(160.0))
    } else {
        (rng.gen_range(0.0..5.0), tat + rng.gen_range(0.0..2.0))
    };
    vec![
        rng.gen_range(-2.0..12.0),
        rng.gen_range(80.0..350.0),
        rng.gen_range(0.0..35000.0),
        pwr,
        twr,
        tat,
        f64::from(rng.gen_bool(0.3) as u8),
        rng.gen_range(0..4) as f64,
        f64::from(wai_on as u8),
    ]
}

/// Bundled schema, rules, envelope and augmentation of a case, without rows.
pub fn case_definition(name: CaseName) -> SyntheticCase {
    let (schema, rules, envelope, augmentation) = match name {
        CaseName::LiftBalance => {
            let (s, r, e) = lift_case();
            (s, r, e, vec![])
        }
        CaseName::HeatBalance => heat_case(),
    };
    SyntheticCase {
        name,
        n: 0,
        sigma: 0.0,
        seed: 0,
        schema,
        rules,
        envelope,
        augmentation,
    }
}

/// Draws `n` valid rows and labels them with the oracle plus Gaussian noise.
pub fn generate_synthetic_case(name: CaseName, n: usize, sigma: f64, seed: u64) -> Result<(Dataset, SyntheticCase)> {
    if n < 10 {
        return Err(invalid("synthetic cases need n >= 10"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut case = case_definition(name);
    case.n = n;
    case.sigma = sigma;
    case.seed = seed;
    let oracle = case.oracle();
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    while xs.len() < n {
        let x = match name {
            CaseName::LiftBalance => sample_lift(&mut rng),
            CaseName::HeatBalance => sample_heat(&mut rng),
        };
        if !case.envelope.is_valid(&x) || !case.schema.admits_row(&x) {
            continue;
        }
        let mut y = oracle.eval(&x);
        if sigma > 0.0 {
            y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        xs.push(x);
        ys.push(y);
    }
    let ds = Dataset::new(
        case.schema.clone(),
        Matrix::from_rows(&xs, case.schema.input_dim())?,
        Matrix::from_rows(&ys, case.schema.output_dim())?,
    )?;
    Ok((ds, case))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physreg::augment_batch;
    use crate::rulespace::derive_search_space;
    use crate::search::{run_campaign, Algorithm, SearchParams};

    #[test]
    fn rows_are_valid_and_deterministic() {
        for name in [CaseName::LiftBalance, CaseName::HeatBalance] {
            let (a, case) = generate_synthetic_case(name, 50, 0.1, 7).unwrap();
            let (b, _) = generate_synthetic_case(name, 50, 0.1, 7).unwrap();
            assert_eq!(a.inputs(), b.inputs());
            assert_eq!(a.outputs(), b.outputs());
            for x in a.inputs().iter_rows() {
                assert!(case.envelope.is_valid(x));
            }
            for r in &case.rules {
                r.validate(&case.schema).unwrap();
            }
            for g in &case.augmentation {
                g.validate(&case.schema).unwrap();
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_synthetic_case(CaseName::LiftBalance, 5, 0.0, 0).is_err());
        assert!(generate_synthetic_case(CaseName::LiftBalance, 20, -1.0, 0).is_err());
        assert!("wind".parse::<CaseName>().is_err());
        assert_eq!("heat-balance".parse::<CaseName>().unwrap(), CaseName::HeatBalance);
    }

    #[test]
    fn noise_free_labels_match_oracle() {
        let (ds, case) = generate_synthetic_case(CaseName::HeatBalance, 30, 0.0, 1).unwrap();
        let pred = case.oracle().predict(ds.inputs()).unwrap();
        assert_eq!(&pred, ds.outputs());
    }

    /// Partial derivative of the oracle along `f`, by central differences.
    fn partial(o: &Oracle, x: &[f64], f: usize, t: usize, h: f64) -> f64 {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[f] += h;
        b[f] -= h;
        (o.eval(&a)[t] - o.eval(&b)[t]) / (2.0 * h)
    }

    #[test]
    fn derivative_signs_follow_rules() {
        for name in [CaseName::LiftBalance, CaseName::HeatBalance] {
            let (ds, case) = generate_synthetic_case(name, 200, 0.0, 3).unwrap();
            let o = case.oracle();
            for x in ds.inputs().iter_rows() {
                for r in case.rules.iter().filter(|r| r.applies_to(x) && r.expect == Expectation::Increase) {
                    for p in &r.premises {
                        if case.schema.features[p.feature].is_discrete() {
                            continue;
                        }
                        for &t in &r.targets {
                            let d = partial(&o, x, p.feature, t, 1e-4);
                            let ok = match p.trend {
                                Trend::Increase => d >= 0.0,
                                Trend::Decrease => d <= 0.0,
                            };
                            assert!(ok, "{name} rule {} feature {} slope {d}", r.id, p.feature);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_is_sound_and_flipped_oracle_is_caught() {
        for name in [CaseName::LiftBalance, CaseName::HeatBalance] {
            let (ds, case) = generate_synthetic_case(name, 20, 0.0, 5).unwrap();
            for alg in [Algorithm::Pso, Algorithm::Ga, Algorithm::Rs] {
                let params = SearchParams::new(alg, 10, 8, 2);
                let (store, _) = run_campaign(&case.oracle(), &ds, &case.rules, &case.envelope, &params).unwrap();
                assert_eq!(store.len(), 0, "{name} {alg}");
            }
            let params = SearchParams::new(Algorithm::Pso, 10, 8, 2);
            let (store, _) = run_campaign(&case.flipped_oracle(), &ds, &case.rules, &case.envelope, &params).unwrap();
            for (i, x) in ds.inputs().iter_rows().enumerate() {
                let searchable = case
                    .rules
                    .iter()
                    .filter(|r| r.expect != Expectation::Invariant && r.applies_to(x))
                    .any(|r| derive_search_space(r, x, &case.schema.features).is_ok());
                if searchable {
                    assert!(store.for_parent(i).next().is_some(), "{name} anchor {i}");
                }
            }
        }
    }

    #[test]
    fn shift_augmentation_preserves_oracle() {
        let (ds, case) = generate_synthetic_case(CaseName::HeatBalance, 40, 0.0, 9).unwrap();
        let mut x = ds.inputs().clone();
        let mut y = ds.outputs().clone();
        let a1: Vec<AugmentationRule> = case.augmentation.iter().filter(|a| a.id == "A1").cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        augment_batch(&mut x, &mut y, &a1, 1.0, &case.schema, &mut rng);
        let o = case.oracle();
        let mut changed = 0;
        for r in 0..x.rows() {
            let want = o.eval(x.row(r));
            for (t, w) in want.iter().enumerate() {
                assert!((y.get(r, t) - w).abs() < 1e-9);
            }
            changed += usize::from(x.row(r) != ds.inputs().row(r));
        }
        assert!(changed > 0);
    }

    #[test]
    fn off_state_boundary_rule_matches_oracle() {
        // with TWR = TAT the oracle returns TAT exactly
        let (ds, case) = generate_synthetic_case(CaseName::HeatBalance, 40, 0.0, 2).unwrap();
        let a4 = case.augmentation.iter().find(|a| a.id == "A4").unwrap();
        for (x, y) in ds.inputs().iter_rows().zip(ds.outputs().iter_rows()) {
            if !a4.applies_to(x) {
                continue;
            }
            let (nx, ny) = a4.apply(x, y, 0.0);
            assert_eq!(ny, vec![nx[heat::TAT]; 2]);
            let o = case.oracle().eval(&nx);
            assert!((o[0] - ny[0]).abs() < 1e-12);
        }
    }
}
