use esconv_core::*;

#[test]
fn every_check_passes_on_at_least_19_of_20_seeds() {
    let mut tally: std::collections::BTreeMap<String, (usize, usize)> = Default::default();
    for seed in 0..20u64 {
        let reports = run_all_checks(rng::derive_seed(0x00AC_CE97, seed)).unwrap();
        // a seed passes a check when every report of that check passes
        for (check, (pass, total)) in pass_counts(&reports) {
            let e = tally.entry(check).or_default();
            e.0 += (pass == total) as usize;
            e.1 += 1;
        }
    }
    assert_eq!(tally.len(), CheckId::ALL.len());
    for (check, (pass, total)) in tally {
        assert_eq!(total, 20);
        assert!(pass >= 19, "{check}: {pass}/20");
    }
}

#[test]
fn decrease_and_quantile_hold_at_every_default_probe() {
    let d = Defaults::shipped();
    for key in d.probes.keys() {
        let spec: ObjectiveSpec = key.parse().unwrap();
        if !make_objective(&spec).unwrap().has_null_level_sets() {
            continue;
        }
        for id in [CheckId::ExpectedDecrease, CheckId::QuantileBound] {
            let reports = run_check(id, Some(&spec), &CheckOverrides::default(), 11).unwrap();
            assert_eq!(reports.len(), d.probes[key].len());
            for r in reports {
                assert!(
                    r.pass,
                    "{id} {key} sigma={}: {:?}",
                    r.inputs["sigma"], r.parts
                );
            }
        }
    }
}

#[test]
fn plateaus_are_rejected_by_the_null_level_set_checks() {
    let spec: ObjectiveSpec = "stepped_sphere:k=4,d=2".parse().unwrap();
    let o = CheckOverrides::from_pairs(&["m=1,0", "sigma=0.3"]).unwrap();
    assert!(run_check(CheckId::ExpectedDecrease, Some(&spec), &o, 1).is_err());
}

#[test]
fn plateau_report_carries_level_statistics() {
    let r = &run_check(
        CheckId::PlateauDecrease,
        None,
        &CheckOverrides::default(),
        5,
    )
    .unwrap()[0];
    assert!(r.pass);
    let s = r.plateau.as_ref().unwrap();
    assert!(s.zeta > 0.0 && s.zeta <= s.zeta_all_levels);
    assert!((s.level_mass - std::f64::consts::PI / 4.0).abs() < 1e-12);
    assert!(s.r_less.iter().zip(&s.r_leq).all(|(a, b)| a < b));
    assert!(r.part("weak_literal").unwrap().informational);
}

#[test]
fn overrides_reach_the_check() {
    let o = CheckOverrides::from_pairs(&["n=2000", "a=3"]).unwrap();
    let r = run_check(CheckId::StepScaling, None, &o, 3).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].n_samples, 2000);
    assert_eq!(r[0].inputs["a"], 3.0);

    let spec: ObjectiveSpec = "linear_ridge:a=4".parse().unwrap();
    let o = CheckOverrides::from_pairs(&["n=200000"]).unwrap();
    let r = run_check(CheckId::CaseStudyRate, Some(&spec), &o, 3).unwrap();
    assert!(r[0].pass);
    assert!((r[0].inputs["rate"].as_f64().unwrap() - 0.077_979).abs() < 1e-6);
}

#[test]
fn checks_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let o = CheckOverrides::default();
                let mut v = run_check(CheckId::QuantileBound, None, &o, 9).unwrap();
                v.extend(run_check(CheckId::Gap, None, &o, 9).unwrap());
                serde_json::to_string(&v).unwrap()
            })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn summary_has_one_row_per_report() {
    let reports = run_check(
        CheckId::ExpectedDecrease,
        None,
        &CheckOverrides::default(),
        2,
    )
    .unwrap();
    let csv = summary_csv(&reports);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check,objective,pass,slack,n"));
    assert_eq!(lines.count(), reports.len());
    assert!(csv.contains("expected_decrease,sphere:d=2,true,"));
}

#[test]
fn reports_round_trip_through_json() {
    for r in run_check(
        CheckId::PlateauDecrease,
        None,
        &CheckOverrides::default(),
        4,
    )
    .unwrap()
    {
        let text = serde_json::to_string(&r).unwrap();
        let back: BoundCheckReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
