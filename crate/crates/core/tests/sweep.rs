use quasinorm::regime::{sweep, RegimeOptions, SweepCell, Verdict};

#[test]
fn coarse_sweep_resolves_almost_every_cell() {
    let rs: Vec<f64> = (0..5).map(|i| 2.5 + 3.5 * i as f64 / 4.0).collect();
    let ms: Vec<f64> = (0..5).map(|j| 0.1 * 100f64.powf(j as f64 / 4.0)).collect();
    let cells: Vec<SweepCell> = rs.iter().flat_map(|&r| ms.iter().map(move |&m| SweepCell { r, m })).collect();
    let rows = sweep(3, &cells, &RegimeOptions::default());
    let resolved = rows.iter().filter(|v| v.verdict.is_resolved()).count();
    assert!(resolved >= 23, "{resolved} of 25 resolved");
    for v in &rows {
        if v.r == 6.0 {
            assert_eq!(v.verdict, Verdict::MinusInf);
        }
        if v.r < 10.0 / 3.0 {
            assert_eq!(v.verdict, Verdict::NegAttained, "r = {}, m = {}", v.r, v.m);
        }
    }
}
