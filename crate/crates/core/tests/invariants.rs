//! Randomized cross-checks of the closed-form pair energies against
//! quadrature, and of the structural symmetries of the kernel.

use proptest::prelude::*;
use twoslope_core::kernel::{
    quadrature_oracle, segment_pair_energy, KernelExponent, Segment,
};

fn segment_pair() -> impl Strategy<Value = (Segment, Segment)> {
    // disjoint pair with a comfortable range of lengths, gaps and slopes
    (
        0.05f64..2.0,   // len a
        0.05f64..2.0,   // len b
        0.01f64..30.0,  // gap
        -4.0f64..4.0,   // slope a
        -4.0f64..4.0,   // slope b
        -2.0f64..2.0,   // value of a at lo
        -2.0f64..2.0,   // value of b at lo
        -3.0f64..3.0,   // translation
    )
        .prop_map(|(la, lb, gap, sa, sb, va, vb, t)| {
            let a = Segment::new(t, t + la, va, sa).unwrap();
            let b = Segment::new(t + la + gap, t + la + gap + lb, vb, sb).unwrap();
            (a, b)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn closed_form_matches_quadrature((a, b) in segment_pair(), si in 0usize..5) {
        let s = [0.1, 0.3, 0.5, 0.6, 0.85][si];
        let k = KernelExponent::new(s).unwrap();
        let closed = segment_pair_energy(&a, &b, &k, true).unwrap();
        let scale = closed.abs().max(1.0);
        let oracle = quadrature_oracle(&a, &b, &k, 1e-9 * scale).unwrap();
        prop_assert!(
            (closed - oracle).abs() <= 1e-7 * scale,
            "s={s} closed={closed} oracle={oracle}"
        );
    }

    #[test]
    fn pair_energy_symmetries((a, b) in segment_pair(), si in 0usize..3) {
        let s = [0.25, 0.5, 0.75][si];
        let k = KernelExponent::new(s).unwrap();
        let v = segment_pair_energy(&a, &b, &k, true).unwrap();
        // translation invariance
        let vt = segment_pair_energy(&a.translated(5.3), &b.translated(5.3), &k, true).unwrap();
        prop_assert!((v - vt).abs() <= 1e-8 * v.abs().max(1.0), "v={v} vt={vt}");
        // reflection through the origin swaps the roles and negates slopes
        let refl = |seg: &Segment| {
            Segment::new(-seg.hi, -seg.lo, seg.value_at(seg.hi), -seg.slope).unwrap()
        };
        let vr = segment_pair_energy(&refl(&b), &refl(&a), &k, true).unwrap();
        prop_assert!((v - vr).abs() <= 1e-8 * v.abs().max(1.0), "v={v} vr={vr}");
        // nonnegativity
        prop_assert!(v >= -1e-10);
    }

    #[test]
    fn branch_continuity_near_half((a, b) in segment_pair()) {
        let at = |s: f64| {
            segment_pair_energy(&a, &b, &KernelExponent::new(s).unwrap(), true).unwrap()
        };
        let mid = at(0.5);
        let scale = mid.abs().max(1.0);
        prop_assert!((at(0.5 - 1e-7) - mid).abs() <= 1e-5 * scale);
        prop_assert!((at(0.5 + 1e-7) - mid).abs() <= 1e-5 * scale);
    }
}
