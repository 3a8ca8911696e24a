use proptest::prelude::*;
use scnet::bandplan::{cascade, global_compression, plan, BandSplitSpec};

/// (low %, mid %, high %) rows with their published compression ratio.
const GCR_ROWS: [([f64; 3], f64); 7] = [
    ([10.0, 23.3, 66.7], 0.80),
    ([15.0, 25.0, 60.0], 0.75),
    ([10.0, 76.7, 13.3], 0.70),
    ([12.5, 64.2, 23.3], 0.70),
    ([15.0, 51.7, 33.3], 0.70),
    ([17.5, 39.2, 43.3], 0.70),
    ([20.0, 26.7, 53.3], 0.70),
];

#[test]
fn published_compression_ratios() {
    for (pct, gcr) in GCR_ROWS {
        let spec = BandSplitSpec::new(pct.map(|p| p / 100.0), [1, 4, 16]).unwrap();
        let got = global_compression(&spec);
        assert!((got - gcr).abs() <= 0.005, "{pct:?}: {got}");
    }
    let uniform = BandSplitSpec::new([0.25, 0.25, 0.5], [4, 4, 4]).unwrap();
    assert_eq!(global_compression(&uniform), 0.75);
}

#[test]
fn default_cascade() {
    let c = cascade(2049, &BandSplitSpec::default(), 3).unwrap();
    assert_eq!(c.widths, vec![2049, 615, 185, 56]);
    let text = c.to_string();
    assert!(text.ends_with("cascade: 2049 -> 615 -> 185 -> 56"), "{text}");
}

/// Independent recomputation of one block's output width.
fn oracle_out(f: usize, p: [f64; 3], s: [usize; 3]) -> usize {
    let low = (p[0] * f as f64 + 1e-9).floor() as usize;
    let mid = (p[1] * f as f64 + 1e-9).floor() as usize;
    let high = f - low - mid;
    low.div_ceil(s[0]) + mid.div_ceil(s[1]) + high.div_ceil(s[2])
}

proptest! {
    #[test]
    fn plan_matches_oracle(f in 64usize..5000, a in 0.05f64..0.4, b in 0.05f64..0.5) {
        let p = [a, b, 1.0 - a - b];
        prop_assume!(p[2] > 0.05);
        let spec = BandSplitSpec::new(p, [1, 4, 16]).unwrap();
        let pl = plan(f, &spec).unwrap();
        prop_assert_eq!(pl.output_width, oracle_out(f, p, [1, 4, 16]));
        prop_assert_eq!(pl.bands.iter().map(|b| b.width).sum::<usize>(), f);
        for b in &pl.bands {
            prop_assert_eq!(b.padded_width() % b.stride, 0);
            prop_assert!(b.right_pad < b.stride);
        }
        // retention is within rounding slack of the ideal ratio
        let ideal = 1.0 - global_compression(&spec);
        prop_assert!((pl.retention() - ideal).abs() <= 3.0 / f as f64);
    }
}
