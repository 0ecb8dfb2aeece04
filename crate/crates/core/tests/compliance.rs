mod common;

use std::sync::Arc;

use common::World;
use peasflow::compliance::{
    check_cdc, check_consumer, check_ip, check_jac, compliance_check, evaluate, ComplianceChecker, ComplianceOptions,
    ConsumerPolicy,
};
use peasflow::engine::{Tuple, Value};
use peasflow::hierarchy::{id_set, IdSet};
use peasflow::peas::{HistoryEntry, PeasAttribute};
use peasflow::preferences::{compose, IntendedPurpose, JointAccessConstraint, PrivacyPreference};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frozen_pi1() -> Tuple {
    let text = std::fs::read_to_string(common::repo_path("scenarios/smarthome-pi1-output.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn names(v: &peasflow::compliance::ComplianceVerdict) -> Vec<&'static str> {
    v.failed_checks.iter().map(|c| c.name()).collect()
}

#[test]
fn people_count_is_withheld_air_quality_released() {
    let s = common::smarthome();
    let policy = ConsumerPolicy::new("smart-home-company", "admin");
    let t = frozen_pi1();
    let (out, verdicts) = compliance_check(&t, &policy, &s.taxonomies, ComplianceOptions::default()).unwrap();
    assert_eq!(out.names().collect::<Vec<_>>(), ["airQuality"]);
    assert_eq!(names(&verdicts[0]), ["cdc"]);
    assert!(verdicts[1].passed);

    let people = t.get("peopleCount").unwrap();
    assert!(check_consumer(people, &policy));
    assert!(check_ip(people, &policy, &s.taxonomies).unwrap());
    assert!(check_jac(people, &policy, &s.taxonomies, ComplianceOptions::default()).unwrap());
    assert!(!check_cdc(people, &s.taxonomies).unwrap());
}

#[test]
fn electricity_company_is_not_in_the_composed_consumer_set() {
    let s = common::smarthome();
    let composed = compose(
        [
            s.preference("temperature").unwrap().as_ref(),
            s.preference("electricityUsage").unwrap().as_ref(),
        ],
        &s.taxonomies,
    )
    .unwrap();
    let a = PeasAttribute {
        pp: Some(Arc::new(composed)),
        ..PeasAttribute::raw("id_room", Value::Int(1))
    };
    assert!(!check_consumer(
        &a,
        &ConsumerPolicy::new("electricity-company", "admin")
    ));
}

fn pp_with_ip(aip: &[&str], exc: &[&str]) -> PrivacyPreference {
    PrivacyPreference::new(
        "t",
        ["c"],
        IntendedPurpose::new(id_set(aip), id_set(exc)),
        JointAccessConstraint::new(
            id_set(["generic"]),
            IdSet::new(),
            IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
        ),
        id_set(["sensitive"]),
    )
}

#[test]
fn purpose_checks() {
    let s = common::smarthome();
    let tax = &s.taxonomies;
    let attr = |pp: PrivacyPreference| PeasAttribute {
        pp: Some(Arc::new(pp)),
        category: id_set(["generic"]),
        ..PeasAttribute::raw("t", Value::Int(0))
    };
    let a = attr(pp_with_ip(&["admin"], &[]));
    assert!(check_ip(&a, &ConsumerPolicy::new("c", "admin"), tax).unwrap());
    assert!(!check_ip(&a, &ConsumerPolicy::new("c", "marketing"), tax).unwrap());
    let a = attr(pp_with_ip(&["admin"], &["billing"]));
    assert!(!check_ip(&a, &ConsumerPolicy::new("c", "billing"), tax).unwrap());
}

#[test]
fn jac_and_cdc_history_checks() {
    let s = common::smarthome();
    let tax = &s.taxonomies;
    let policy = ConsumerPolicy::new("c", "admin");
    let mut a = PeasAttribute {
        pp: Some(Arc::new(pp_with_ip(&["admin"], &[]))),
        category: id_set(["generic"]),
        ..PeasAttribute::raw("t", Value::Int(0))
    };
    assert!(check_cdc(&a, tax).unwrap());
    a.history.push(Arc::new(HistoryEntry {
        ac: id_set(["generic", "health"]),
        rc: id_set(["generic"]),
    }));
    assert!(!check_jac(&a, &policy, tax, ComplianceOptions::default()).unwrap());
    assert!(check_cdc(&a, tax).unwrap());
}

#[test]
fn public_attributes_pass_unchanged() {
    let s = common::smarthome();
    let t = Tuple::new(
        5,
        vec![
            PeasAttribute::raw("a", Value::Int(1)),
            PeasAttribute::raw("b", Value::Float(2.0)),
        ],
    );
    let (out, _) = compliance_check(
        &t,
        &ConsumerPolicy::new("x", "marketing"),
        &s.taxonomies,
        Default::default(),
    )
    .unwrap();
    assert_eq!(out, t);
}

#[test]
fn empty_history_jac_purpose_is_literal_unless_flagged() {
    let s = common::smarthome();
    let tax = &s.taxonomies;
    let pp = PrivacyPreference::new(
        "t",
        ["c"],
        IntendedPurpose::new(id_set(["any"]), IdSet::new()),
        JointAccessConstraint::new(
            IdSet::new(),
            IdSet::new(),
            IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
        ),
        IdSet::new(),
    );
    let a = PeasAttribute {
        pp: Some(Arc::new(pp)),
        category: id_set(["generic"]),
        ..PeasAttribute::raw("t", Value::Int(0))
    };
    let policy = ConsumerPolicy::new("c", "marketing");
    let literal = evaluate(&a, &policy, tax, ComplianceOptions::default()).unwrap();
    assert_eq!(names(&literal), ["jac_ip"]);
    let relaxed = ComplianceOptions {
        jac_ip_vacuous_on_empty_history: true,
    };
    assert!(evaluate(&a, &policy, tax, relaxed).unwrap().passed);
}

#[test]
fn unknown_policy_purpose_is_an_error() {
    let s = common::smarthome();
    let t = frozen_pi1();
    assert!(compliance_check(
        &t,
        &ConsumerPolicy::new("c", "nowhere"),
        &s.taxonomies,
        Default::default()
    )
    .is_err());
}

fn instance(seed: u64) -> (World, Tuple, ConsumerPolicy, ComplianceOptions) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = World::random(&mut rng, 30);
    let t = Tuple::new(0, (0..4).map(|i| w.attribute(&mut rng, &format!("a{i}"))).collect());
    let policy = w.policy(&mut rng);
    let opts = ComplianceOptions {
        jac_ip_vacuous_on_empty_history: seed.is_multiple_of(2),
    };
    (w, t, policy, opts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn verdicts_match_definitional_oracle(seed in any::<u64>()) {
        let (w, t, policy, opts) = instance(seed);
        let (_, verdicts) = compliance_check(&t, &policy, &w.taxonomies, opts).unwrap();
        for (a, v) in t.attributes.iter().zip(&verdicts) {
            let want = w.oracle(a, &policy, opts);
            let got: std::collections::BTreeSet<&str> = v.failed_checks.iter().map(|c| c.name()).collect();
            prop_assert_eq!(&got, &want);
            prop_assert_eq!(v.passed, want.is_empty());
        }
    }

    #[test]
    fn check_is_an_idempotent_filter(seed in any::<u64>()) {
        let (w, t, policy, opts) = instance(seed);
        let (once, _) = compliance_check(&t, &policy, &w.taxonomies, opts).unwrap();
        let mut rest = t.attributes.iter();
        for a in &once.attributes {
            prop_assert!(rest.any(|b| b == a), "output is a subsequence of the input");
        }
        let (twice, _) = compliance_check(&once, &policy, &w.taxonomies, opts).unwrap();
        prop_assert_eq!(&twice, &once);
        let mut cached = ComplianceChecker::new(w.taxonomies.clone(), opts);
        prop_assert_eq!(cached.check(&t, &policy).unwrap().0, once);
    }

    #[test]
    fn passing_the_composition_passes_every_input(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = World::random(&mut rng, 20);
        let pps: Vec<PrivacyPreference> = (0..3).map(|_| w.pp(&mut rng)).collect();
        let base = w.attribute(&mut rng, "x");
        let policy = w.policy(&mut rng);
        let with = |pp: PrivacyPreference| PeasAttribute { pp: Some(Arc::new(pp)), ..base.clone() };
        let composed = with(compose(&pps, &w.taxonomies).unwrap());
        if evaluate(&composed, &policy, &w.taxonomies, Default::default()).unwrap().passed {
            for pp in &pps {
                prop_assert!(evaluate(&with(pp.clone()), &policy, &w.taxonomies, Default::default()).unwrap().passed);
            }
        }
    }
}
