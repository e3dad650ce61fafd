use proptest::prelude::*;
use remlab::{DisorderFamily, IndexTerm, ModelSpec};
use remlab_cli::args::{parse_betas, parse_box, parse_sizes};
use remlab_cli::{parse_spec, write_spec};

fn family() -> impl Strategy<Value = DisorderFamily> {
    prop_oneof![
        Just(DisorderFamily::gaussian()),
        Just(DisorderFamily::two_sided_exp()),
        (0.2f64..3.0).prop_map(|s| DisorderFamily::weibull(s).unwrap()),
        (0.2f64..3.0).prop_map(|s| DisorderFamily::one_sided_weibull(s).unwrap()),
    ]
}

/// BKM or ExternalField specs over up to four blocks with arbitrary index sets.
fn spec() -> impl Strategy<Value = ModelSpec> {
    (1usize..5, any::<bool>(), 0.0f64..2.0)
        .prop_flat_map(|(n, field, h)| {
            let weights = proptest::collection::vec(0.05f64..1.0, n);
            let terms = proptest::collection::vec((1u32..(1 << n), 0.0f64..3.0, family()), 1..5);
            (Just(n), Just(field), Just(h), weights, terms)
        })
        .prop_map(|(n, field, h, w, terms)| {
            let total: f64 = w.iter().sum();
            let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
            let head: f64 = p[..n - 1].iter().sum();
            p[n - 1] = 1.0 - head;
            let terms: Vec<IndexTerm> = terms
                .into_iter()
                .map(|(mask, a, f)| IndexTerm::new((0..n).filter(|i| mask & (1 << i) != 0).collect(), a, f))
                .collect();
            if field {
                ModelSpec::external_field(p, terms, h)
            } else {
                ModelSpec::bkm(p, terms, 2)
            }
        })
        .prop_filter_map("valid", |r| r.ok())
}

proptest! {
    #[test]
    fn specs_round_trip(s in spec()) {
        let text = write_spec(&s).unwrap();
        let (back, _) = parse_spec(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(write_spec(&back).unwrap(), text);
    }

    #[test]
    fn parsers_never_panic(text in ".{0,64}") {
        let _ = parse_betas(&text);
        let _ = parse_sizes(&text);
        let _ = parse_box(&text);
        let _ = parse_spec(&text);
    }

    #[test]
    fn beta_ranges_are_inclusive(start in -5.0f64..5.0, steps in 0usize..200, step in 0.01f64..1.0) {
        let stop = start + steps as f64 * step;
        let v = parse_betas(&format!("{start}:{stop}:{step}")).unwrap();
        prop_assert_eq!(v.len(), steps + 1);
        prop_assert_eq!(v[0], start);
        prop_assert!((v[steps] - stop).abs() <= 1e-9 * (1.0 + stop.abs()));
    }

    #[test]
    fn spec_like_json_never_panics(
        variant in prop_oneof![Just("REM"), Just("GREM"), Just("BKM"), Just("ExternalField"), Just("x")],
        p in proptest::collection::vec(-1.0f64..2.0, 0..4),
        idx in proptest::collection::vec(proptest::collection::vec(-1i64..6, 0..4), 0..4),
        h in -1.0f64..1.0,
    ) {
        let indices: Vec<String> = idx
            .iter()
            .map(|i| format!(r#"{{"index":{i:?},"weight":1.0,"family":{{"kind":"gaussian"}}}}"#))
            .collect();
        let text = format!(r#"{{"variant":"{variant}","p":{p:?},"indices":[{}],"h":{h}}}"#, indices.join(","));
        let _ = parse_spec(&text);
    }
}
