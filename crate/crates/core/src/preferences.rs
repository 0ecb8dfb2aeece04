//! Privacy preferences and their most-conservative composition.
//!
//! A preference is stored in raw form (allowed nodes plus exceptions) and
//! compared through its [`NormalizedPreference`], where every component is
//! expanded to the set of tree nodes it implies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{HierarchyError, IdSet, ImpliedSet, Taxonomies};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntendedPurpose {
    #[serde(default)]
    pub aip: IdSet,
    #[serde(default)]
    pub exc: IdSet,
}

impl IntendedPurpose {
    pub fn new(aip: IdSet, exc: IdSet) -> Self {
        IntendedPurpose { aip, exc }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAccessConstraint {
    #[serde(default)]
    pub adc: IdSet,
    #[serde(default)]
    pub exc: IdSet,
    #[serde(default)]
    pub ip: IntendedPurpose,
}

impl JointAccessConstraint {
    pub fn new(adc: IdSet, exc: IdSet, ip: IntendedPurpose) -> Self {
        JointAccessConstraint { adc, exc, ip }
    }
}

/// `⟨attribute, consumer, ip, jac, cdc⟩`. An empty consumer set authorizes
/// nobody.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrivacyPreference {
    #[serde(default)]
    pub attribute: String,
    #[serde(default)]
    pub consumer: BTreeSet<String>,
    #[serde(default)]
    pub ip: IntendedPurpose,
    #[serde(default)]
    pub jac: JointAccessConstraint,
    #[serde(default)]
    pub cdc: IdSet,
}

impl PrivacyPreference {
    pub fn new(
        attribute: impl Into<String>,
        consumer: impl IntoIterator<Item = impl Into<String>>,
        ip: IntendedPurpose,
        jac: JointAccessConstraint,
        cdc: IdSet,
    ) -> Self {
        PrivacyPreference {
            attribute: attribute.into(),
            consumer: consumer.into_iter().map(Into::into).collect(),
            ip,
            jac,
            cdc,
        }
    }

    pub fn with_attribute(mut self, attribute: impl Into<String>) -> Self {
        self.attribute = attribute.into();
        self
    }

    /// Fails on the first id that is missing from its taxonomy.
    pub fn validate(&self, tax: &Taxonomies) -> Result<(), HierarchyError> {
        tax.purposes.check_ids(&self.ip.aip)?;
        tax.purposes.check_ids(&self.ip.exc)?;
        tax.categories.check_ids(&self.jac.adc)?;
        tax.categories.check_ids(&self.jac.exc)?;
        tax.purposes.check_ids(&self.jac.ip.aip)?;
        tax.purposes.check_ids(&self.jac.ip.exc)?;
        tax.categories.check_ids(&self.cdc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreferenceError {
    #[error("cannot compose an empty list of preferences")]
    EmptyInput,
    #[error(transparent)]
    UnknownNode(#[from] HierarchyError),
}

/// Closure-expanded view of a preference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedPreference {
    pub consumer: BTreeSet<String>,
    pub ip_implied: ImpliedSet,
    pub jac_cat_implied: ImpliedSet,
    pub jac_ip_implied: ImpliedSet,
    pub cdc_implied: ImpliedSet,
    pub ip_exc: IdSet,
    pub jac_exc: IdSet,
    pub jac_ip_exc: IdSet,
    pub cdc_raw: IdSet,
}

pub fn normalize(pp: &PrivacyPreference, tax: &Taxonomies) -> Result<NormalizedPreference, PreferenceError> {
    let none: [&str; 0] = [];
    Ok(NormalizedPreference {
        consumer: pp.consumer.clone(),
        ip_implied: tax.purposes.implied_set(&pp.ip.aip, &pp.ip.exc)?,
        jac_cat_implied: tax.categories.implied_set(&pp.jac.adc, &pp.jac.exc)?,
        jac_ip_implied: tax.purposes.implied_set(&pp.jac.ip.aip, &pp.jac.ip.exc)?,
        cdc_implied: tax.categories.implied_set(&pp.cdc, none)?,
        ip_exc: pp.ip.exc.clone(),
        jac_exc: pp.jac.exc.clone(),
        jac_ip_exc: pp.jac.ip.exc.clone(),
        cdc_raw: pp.cdc.clone(),
    })
}

/// Composes the preferences of every attribute a derived value depends on.
///
/// Consumers and allowed purposes/categories are intersected (allowed sets
/// after closure expansion, stored expanded); exceptions and the derivation
/// constraint are unioned. The result keeps the first input's attribute
/// name; callers rename it for the attribute they are producing.
pub fn compose<'a, I>(pps: I, tax: &Taxonomies) -> Result<PrivacyPreference, PreferenceError>
where
    I: IntoIterator<Item = &'a PrivacyPreference>,
{
    let mut iter = pps.into_iter();
    let first = iter.next().ok_or(PreferenceError::EmptyInput)?;

    let mut consumer = first.consumer.clone();
    let mut aip = tax.purposes.closure_of(&first.ip.aip)?;
    let mut ip_exc = first.ip.exc.clone();
    let mut adc = tax.categories.closure_of(&first.jac.adc)?;
    let mut jac_exc = first.jac.exc.clone();
    let mut jac_aip = tax.purposes.closure_of(&first.jac.ip.aip)?;
    let mut jac_ip_exc = first.jac.ip.exc.clone();
    let mut cdc = first.cdc.clone();
    first.validate(tax)?;

    for pp in iter {
        pp.validate(tax)?;
        consumer.retain(|c| pp.consumer.contains(c));
        aip.intersect_with(&tax.purposes.closure_of(&pp.ip.aip)?);
        ip_exc.extend(pp.ip.exc.iter().cloned());
        adc.intersect_with(&tax.categories.closure_of(&pp.jac.adc)?);
        jac_exc.extend(pp.jac.exc.iter().cloned());
        jac_aip.intersect_with(&tax.purposes.closure_of(&pp.jac.ip.aip)?);
        jac_ip_exc.extend(pp.jac.ip.exc.iter().cloned());
        cdc.extend(pp.cdc.iter().cloned());
    }

    Ok(PrivacyPreference {
        attribute: first.attribute.clone(),
        consumer,
        ip: IntendedPurpose::new(aip.to_id_set(), ip_exc),
        jac: JointAccessConstraint::new(
            adc.to_id_set(),
            jac_exc,
            IntendedPurpose::new(jac_aip.to_id_set(), jac_ip_exc),
        ),
        cdc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{id_set, Taxonomy, TaxonomyKind};

    fn flat() -> Taxonomies {
        let purposes = Taxonomy::build(
            TaxonomyKind::Purpose,
            "any",
            &[("any", "admin"), ("any", "marketing"), ("admin", "billing")],
        )
        .unwrap();
        let categories = Taxonomy::build(
            TaxonomyKind::Category,
            "data",
            &[
                ("data", "generic"),
                ("data", "health"),
                ("data", "sensitive"),
                ("data", "air-quality"),
            ],
        )
        .unwrap();
        Taxonomies::new(purposes, categories)
    }

    fn temperature() -> PrivacyPreference {
        PrivacyPreference::new(
            "temperature",
            ["smart-home-company"],
            IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            JointAccessConstraint::new(
                id_set(["generic", "health"]),
                IdSet::new(),
                IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            ),
            id_set(["sensitive"]),
        )
    }

    fn electricity() -> PrivacyPreference {
        PrivacyPreference::new(
            "electricityUsage",
            ["smart-home-company", "electricity-company"],
            IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            JointAccessConstraint::new(
                id_set(["generic"]),
                IdSet::new(),
                IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            ),
            IdSet::new(),
        )
    }

    #[test]
    fn normalizes_charlotte_temperature() {
        let tax = flat();
        let n = normalize(&temperature(), &tax).unwrap();
        assert!(n.ip_implied.contains("admin"));
        assert!(n.jac_cat_implied.contains("generic") && n.jac_cat_implied.contains("health"));
        assert!(n.cdc_implied.contains("sensitive"));
    }

    #[test]
    fn empty_adc_normalizes_to_nothing() {
        let tax = flat();
        let mut pp = temperature();
        pp.jac.adc.clear();
        assert!(normalize(&pp, &tax).unwrap().jac_cat_implied.is_empty());
    }

    #[test]
    fn composes_smart_home_example() {
        let tax = flat();
        let composed = compose([&temperature(), &electricity()], &tax).unwrap();
        let expected = PrivacyPreference::new(
            "temperature",
            ["smart-home-company"],
            IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            JointAccessConstraint::new(
                id_set(["generic"]),
                IdSet::new(),
                IntendedPurpose::new(id_set(["admin"]), IdSet::new()),
            ),
            id_set(["sensitive"]),
        );
        assert_eq!(normalize(&composed, &tax).unwrap(), normalize(&expected, &tax).unwrap());
        // stored in expanded form: admin's closure includes billing
        assert_eq!(composed.ip.aip, id_set(["admin", "billing"]));
    }

    #[test]
    fn singleton_compose_keeps_implied_sets() {
        let tax = flat();
        let pp = temperature();
        let composed = compose([&pp], &tax).unwrap();
        assert_eq!(normalize(&composed, &tax).unwrap(), normalize(&pp, &tax).unwrap());
    }

    #[test]
    fn empty_input_rejected() {
        let tax = flat();
        let none: Vec<&PrivacyPreference> = Vec::new();
        assert_eq!(compose(none, &tax).unwrap_err(), PreferenceError::EmptyInput);
    }

    #[test]
    fn unknown_ids_rejected() {
        let tax = flat();
        let mut pp = temperature();
        pp.cdc.insert("location".into());
        assert!(matches!(
            compose([&pp], &tax),
            Err(PreferenceError::UnknownNode(HierarchyError::UnknownNode { .. }))
        ));
        assert!(normalize(&pp, &tax).is_err());
    }

    #[test]
    fn deserializes_with_defaults() {
        let pp: PrivacyPreference =
            serde_json::from_str(r#"{"attribute":"t","consumer":["a"],"ip":{"aip":["admin"]}}"#).unwrap();
        assert!(pp.jac.adc.is_empty() && pp.cdc.is_empty() && pp.ip.exc.is_empty());
    }
}
