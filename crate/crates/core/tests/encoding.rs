mod common;

use std::sync::Arc;

use common::World;
use peasflow::engine::{Tuple, Value};
use peasflow::hierarchy::id_set;
use peasflow::peas::{HistoryEntry, PeasAttribute};
use peasflow::simnet::{decode_metadata, encode_metadata, encode_tuple, Interner};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frozen_pi1() -> Tuple {
    let text = std::fs::read_to_string(common::repo_path("scenarios/smarthome-pi1-output.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn public_attribute_is_four_octets() {
    let a = PeasAttribute {
        category: id_set(["generic"]),
        ..PeasAttribute::raw("t", Value::Float(1.0))
    };
    let e = encode_metadata(&a, &mut Interner::new());
    // flag 0, one category with id 1, empty history
    assert_eq!(e.bytes, [0, 1, 1, 0]);
    assert_eq!(e.bits(), 32);
}

#[test]
fn people_count_hand_encoding() {
    let s = common::smarthome();
    let mut interner = Interner::for_taxonomies(&s.taxonomies);
    // purposes: any=1 admin=2 marketing=3 billing=4
    // categories: data=5 generic=6 health=7 sensitive=8 air-quality=9
    assert_eq!(interner.get("billing"), Some(4));
    assert_eq!(interner.get("sensitive"), Some(8));
    let t = frozen_pi1();
    let e = encode_metadata(t.get("peopleCount").unwrap(), &mut interner);
    assert_eq!(interner.get("smart-home-company"), Some(10));
    #[rustfmt::skip]
    let want: [u8; 27] = [
        1,
        1, 10,      // consumer
        2, 2, 4,    // ip.aip
        0,          // ip.exc
        1, 6,       // jac.adc
        0,          // jac.exc
        2, 2, 4,    // jac.ip.aip
        0,          // jac.ip.exc
        1, 8,       // cdc
        1, 8,       // category
        2,          // history length
        1, 6, 1, 6, // (generic, generic)
        1, 6, 1, 8, // (generic, sensitive)
    ];
    assert_eq!(e.bytes, want);
    assert_eq!(e.bits(), 216);
}

#[test]
fn ids_above_127_take_two_octets() {
    let mut interner = Interner::new();
    for i in 0..150 {
        interner.intern(&format!("pad{i}"));
    }
    let a = PeasAttribute {
        category: id_set(["late"]),
        ..PeasAttribute::raw("t", Value::Int(0))
    };
    assert_eq!(encode_metadata(&a, &mut interner).bytes, [0, 1, 0x97, 0x01, 0]);
}

#[test]
fn history_growth_adds_bits() {
    let mut a = PeasAttribute {
        category: id_set(["g"]),
        ..PeasAttribute::raw("t", Value::Int(0))
    };
    let mut interner = Interner::new();
    let before = encode_metadata(&a, &mut interner).bits();
    a.history.push(Arc::new(HistoryEntry {
        ac: id_set(["g"]),
        rc: id_set(["g"]),
    }));
    let after = encode_metadata(&a, &mut interner).bits();
    assert_eq!(after, before + 32);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decode_inverts_encode(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = World::random(&mut rng, 30);
        let mut interner = Interner::for_taxonomies(&w.taxonomies);
        let t = Tuple::new(0, (0..3).map(|i| w.attribute(&mut rng, &format!("a{i}"))).collect());
        let mut total = 0;
        for a in &t.attributes {
            let e = encode_metadata(a, &mut interner);
            prop_assert_eq!(e.bits(), 8 * e.bytes.len() as u64);
            total += e.bits();
            let mut want = a.clone();
            if let Some(pp) = &mut want.pp {
                Arc::make_mut(pp).attribute = a.name.clone();
            }
            let back = decode_metadata(&e.bytes, &interner, &a.name, a.value.clone()).unwrap();
            prop_assert_eq!(back, want);
        }
        prop_assert_eq!(encode_tuple(&t, &mut interner), total);
    }

    #[test]
    fn truncated_input_is_an_error(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = World::random(&mut rng, 10);
        let mut interner = Interner::for_taxonomies(&w.taxonomies);
        let a = w.attribute(&mut rng, "a");
        let e = encode_metadata(&a, &mut interner);
        let cut = &e.bytes[..e.bytes.len() - 1];
        prop_assert!(decode_metadata(cut, &interner, "a", Value::Int(0)).is_err());
    }
}
