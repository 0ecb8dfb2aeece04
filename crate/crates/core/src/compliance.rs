//! Consumer-side, a-posteriori compliance checking.
//!
//! An attribute is released to a consumer only if the consumer is listed,
//! the access purpose is an intended purpose, every category the attribute
//! was combined with is allowed by its joint-access constraint, and no
//! category it was derived into is prohibited. Attributes without a
//! preference are public and always pass.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::Tuple;
use crate::hierarchy::{HierarchyError, NodeId, Taxonomies};
use crate::peas::PeasAttribute;
use crate::preferences::{normalize, NormalizedPreference, PreferenceError, PrivacyPreference};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConsumerPolicy {
    pub consumer_id: String,
    pub access_purpose: NodeId,
}

impl ConsumerPolicy {
    pub fn new(consumer_id: impl Into<String>, access_purpose: impl Into<NodeId>) -> Self {
        ConsumerPolicy {
            consumer_id: consumer_id.into(),
            access_purpose: access_purpose.into(),
        }
    }

    pub fn validate(&self, tax: &Taxonomies) -> Result<(), HierarchyError> {
        tax.purposes.check_ids([&self.access_purpose])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Consumer,
    Ip,
    JacIp,
    JacData,
    Cdc,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Consumer, Check::Ip, Check::JacIp, Check::JacData, Check::Cdc];

    pub fn name(self) -> &'static str {
        match self {
            Check::Consumer => "consumer",
            Check::Ip => "ip",
            Check::JacIp => "jac_ip",
            Check::JacData => "jac_data",
            Check::Cdc => "cdc",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceVerdict {
    pub attribute: String,
    pub passed: bool,
    pub failed_checks: BTreeSet<Check>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceOptions {
    /// Skip the jac purpose check for attributes that were never combined
    /// with anything.
    #[serde(default)]
    pub jac_ip_vacuous_on_empty_history: bool,
}

pub fn check_consumer(a: &PeasAttribute, policy: &ConsumerPolicy) -> bool {
    a.pp.as_ref().is_none_or(|pp| pp.consumer.contains(&policy.consumer_id))
}

pub fn check_ip(a: &PeasAttribute, policy: &ConsumerPolicy, tax: &Taxonomies) -> Result<bool, PreferenceError> {
    match &a.pp {
        None => Ok(true),
        Some(pp) => Ok(tax
            .purposes
            .implied_set(&pp.ip.aip, &pp.ip.exc)?
            .contains(policy.access_purpose.as_str())),
    }
}

pub fn check_jac(
    a: &PeasAttribute,
    policy: &ConsumerPolicy,
    tax: &Taxonomies,
    opts: ComplianceOptions,
) -> Result<bool, PreferenceError> {
    match &a.pp {
        None => Ok(true),
        Some(pp) => {
            let n = normalize(pp, tax)?;
            Ok(failed_checks(a, &n, policy, opts).is_disjoint(&[Check::JacIp, Check::JacData].into()))
        }
    }
}

pub fn check_cdc(a: &PeasAttribute, tax: &Taxonomies) -> Result<bool, PreferenceError> {
    match &a.pp {
        None => Ok(true),
        Some(pp) => {
            let none: [&str; 0] = [];
            let cdc = tax.categories.implied_set(&pp.cdc, none)?;
            Ok(a.history
                .iter()
                .all(|he| he.rc.iter().all(|c| !cdc.contains(c.as_str()))))
        }
    }
}

fn failed_checks(
    a: &PeasAttribute,
    n: &NormalizedPreference,
    policy: &ConsumerPolicy,
    opts: ComplianceOptions,
) -> BTreeSet<Check> {
    let ap = policy.access_purpose.as_str();
    let mut failed = BTreeSet::new();
    if !n.consumer.contains(&policy.consumer_id) {
        failed.insert(Check::Consumer);
    }
    if !n.ip_implied.contains(ap) {
        failed.insert(Check::Ip);
    }
    let vacuous = opts.jac_ip_vacuous_on_empty_history && a.history.is_empty();
    if !vacuous && !n.jac_ip_implied.contains(ap) {
        failed.insert(Check::JacIp);
    }
    if !a
        .history
        .iter()
        .all(|he| he.ac.iter().all(|c| n.jac_cat_implied.contains(c.as_str())))
    {
        failed.insert(Check::JacData);
    }
    if a.history
        .iter()
        .any(|he| he.rc.iter().any(|c| n.cdc_implied.contains(c.as_str())))
    {
        failed.insert(Check::Cdc);
    }
    failed
}

/// Runs every check on one attribute.
pub fn evaluate(
    a: &PeasAttribute,
    policy: &ConsumerPolicy,
    tax: &Taxonomies,
    opts: ComplianceOptions,
) -> Result<ComplianceVerdict, PreferenceError> {
    let failed = match &a.pp {
        None => BTreeSet::new(),
        Some(pp) => failed_checks(a, &normalize(pp, tax)?, policy, opts),
    };
    Ok(verdict(a, failed))
}

fn verdict(a: &PeasAttribute, failed: BTreeSet<Check>) -> ComplianceVerdict {
    ComplianceVerdict {
        attribute: a.name.clone(),
        passed: failed.is_empty(),
        failed_checks: failed,
    }
}

/// Keeps the attributes that pass every check, in their original order.
pub fn compliance_check(
    t: &Tuple,
    policy: &ConsumerPolicy,
    tax: &Taxonomies,
    opts: ComplianceOptions,
) -> Result<(Tuple, Vec<ComplianceVerdict>), PreferenceError> {
    ComplianceChecker::new(tax.clone(), opts).check(t, policy)
}

/// Compliance checking with normalized preferences memoized by identity,
/// for consumers that see the same preference objects over and over.
#[derive(Debug)]
pub struct ComplianceChecker {
    taxonomies: Taxonomies,
    options: ComplianceOptions,
    cache: HashMap<usize, (Arc<PrivacyPreference>, Arc<NormalizedPreference>)>,
}

impl ComplianceChecker {
    pub fn new(taxonomies: Taxonomies, options: ComplianceOptions) -> Self {
        ComplianceChecker {
            taxonomies,
            options,
            cache: HashMap::new(),
        }
    }

    fn normalized(&mut self, pp: &Arc<PrivacyPreference>) -> Result<Arc<NormalizedPreference>, PreferenceError> {
        let key = Arc::as_ptr(pp) as usize;
        if let Some((_, n)) = self.cache.get(&key) {
            return Ok(Arc::clone(n));
        }
        if self.cache.len() >= 4096 {
            self.cache.clear();
        }
        let n = Arc::new(normalize(pp, &self.taxonomies)?);
        self.cache.insert(key, (Arc::clone(pp), Arc::clone(&n)));
        Ok(n)
    }

    pub fn evaluate(
        &mut self,
        a: &PeasAttribute,
        policy: &ConsumerPolicy,
    ) -> Result<ComplianceVerdict, PreferenceError> {
        let failed = match &a.pp {
            None => BTreeSet::new(),
            Some(pp) => {
                let n = self.normalized(pp)?;
                failed_checks(a, &n, policy, self.options)
            }
        };
        Ok(verdict(a, failed))
    }

    pub fn check(
        &mut self,
        t: &Tuple,
        policy: &ConsumerPolicy,
    ) -> Result<(Tuple, Vec<ComplianceVerdict>), PreferenceError> {
        policy.validate(&self.taxonomies)?;
        let mut kept = Vec::with_capacity(t.attributes.len());
        let mut verdicts = Vec::with_capacity(t.attributes.len());
        for a in &t.attributes {
            let v = self.evaluate(a, policy)?;
            if v.passed {
                kept.push(a.clone());
            }
            verdicts.push(v);
        }
        Ok((Tuple::new(t.timestamp, kept), verdicts))
    }
}
