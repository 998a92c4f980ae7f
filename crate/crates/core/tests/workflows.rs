use lambda_core::hyperreal::expr::{self, Value};
use lambda_core::internal::{sexpr, transfer_eval};
use lambda_core::poly::q_int;
use lambda_core::variational::{self, MinimizeConfig, SweepReport, Verdict};
use lambda_core::{Magnitude, Oracle};

#[test]
fn formula_file_round_trip() {
    let o = Oracle::with_horizon(20_000);
    let text = r#"{"sets": {"A": {"range": ["0", "n"]}, "G": {"progression": {"start": "1/n", "step": "1/n", "count": "n", "from": 1}}},
 "values": {"c": "1000000", "w": "omega"}}
---
(forall x A (>= x 0))
(exists x A (= (* x x) 2))
(exists x A (> x c))
(exists x G (= (* 2 x) 1))
(forall x G (and (> x 0) (<= x 1)))
"#;
    let file = sexpr::parse_file(&o, text).unwrap();
    let got: Vec<bool> = file
        .sentences
        .iter()
        .map(|(_, _, f)| transfer_eval(&o, f, &file.values).unwrap())
        .collect();
    assert_eq!(got[..3], [true, false, true]);
    assert!(got[4]);
    // k/n = 1/2 only on even levels; the answer follows the oracle's parity.
    let evens = o.is_qualified(&lambda_core::SetDescriptor::evens()).unwrap();
    assert_eq!(got[3], evens);
    assert!(o.check_consistency().is_consistent());
}

#[test]
fn expressions_and_standard_parts() {
    let o = Oracle::default();
    let Value::Number(x) = expr::eval_str(&o, "st((1+eps)*(1-eps))").unwrap() else {
        panic!("number expected")
    };
    assert_eq!(x.standard_part().unwrap(), Some(q_int(1)));
    let Value::Number(y) = expr::eval_str(&o, "omega^2 / (omega + 1)").unwrap() else {
        panic!("number expected")
    };
    assert_eq!(y.classify().unwrap(), Magnitude::Infinite);
    assert!(matches!(expr::eval_str(&o, "eps < 1/1000000").unwrap(), Value::Bool(true)));
}

#[test]
fn sweep_report_serializes() {
    let net = variational::minimize_net(&[2, 4, 8, 16], &MinimizeConfig::default()).unwrap();
    let report = SweepReport::new(&net);
    assert_eq!(report.certificate, Verdict::Pass);
    let json = serde_json::to_string(&report).unwrap();
    let back: SweepReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert!(json.contains("\"certificate\":\"PASS\""));
}
