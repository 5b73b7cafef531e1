//! Instruction template pool and placeholder grounding.
//!
//! The pool ships 10 hand-written templates per capability plus 10
//! conjunctions and 10 stop clauses as an editable JSON data file.
//! Assembled templates keep one placeholder per capability in sequence
//! order; instantiation resolves placeholders against sub-goals and
//! prefixes the agent's initial state clause.

use super::{Capability, GenError, SubGoal, SubGoalTarget};
use crate::env::Pose;
use rand::Rng;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

const BUILTIN_POOL: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, Deserialize)]
pub struct TemplatePool {
    pub schema: u32,
    pub capability_templates: BTreeMap<String, Vec<String>>,
    pub conjunctions: Vec<String>,
    pub stop_clauses: Vec<String>,
}

impl TemplatePool {
    /// The pool shipped with the crate (`data/templates.json`).
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_POOL).expect("builtin template pool is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, GenError> {
        let pool: TemplatePool =
            serde_json::from_str(text).map_err(|e| GenError::BadTemplatePool(e.to_string()))?;
        pool.validate()?;
        Ok(pool)
    }

    pub fn from_path(path: &Path) -> Result<Self, GenError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GenError::BadTemplatePool(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), GenError> {
        for cap in Capability::ALL {
            let templates = self
                .capability_templates
                .get(cap.label().replace('-', "").as_str())
                .or_else(|| self.capability_templates.get(cap.label()))
                .ok_or_else(|| {
                    GenError::BadTemplatePool(format!("missing templates for {cap}"))
                })?;
            if templates.is_empty() {
                return Err(GenError::BadTemplatePool(format!("no templates for {cap}")));
            }
            let marker = format!("{{{}}}", cap.placeholder());
            for t in templates {
                if !t.contains(&marker) {
                    return Err(GenError::BadTemplatePool(format!(
                        "template for {cap} lacks {marker}: {t}"
                    )));
                }
            }
        }
        if self.conjunctions.is_empty() || self.stop_clauses.is_empty() {
            return Err(GenError::BadTemplatePool(
                "need at least one conjunction and one stop clause".into(),
            ));
        }
        Ok(())
    }

    fn templates_for(&self, cap: Capability) -> &[String] {
        self.capability_templates
            .get(cap.label().replace('-', "").as_str())
            .or_else(|| self.capability_templates.get(cap.label()))
            .expect("validated pool")
    }
}

/// An assembled instruction template: one clause per capability, joined
/// plainly or with a conjunction, closed by a stop clause.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionTemplate {
    pub capabilities: Vec<Capability>,
    pub text: String,
    /// Conjunction index, or `u32::MAX` for plain sentence joins.
    pub conjunction_style: u32,
    pub stop_clause: u32,
}

pub const NO_CONJUNCTION: u32 = u32::MAX;

/// Assembles a template for a capability sequence. Roughly half of the
/// templates join clauses with a conjunction, the rest join plainly.
pub fn build_template(
    pool: &TemplatePool,
    capabilities: &[Capability],
    rng: &mut impl Rng,
) -> InstructionTemplate {
    let conjunction_style = if rng.gen_bool(0.5) {
        rng.gen_range(0..pool.conjunctions.len()) as u32
    } else {
        NO_CONJUNCTION
    };
    let stop_clause = rng.gen_range(0..pool.stop_clauses.len()) as u32;
    let clauses: Vec<String> = capabilities
        .iter()
        .map(|&cap| {
            let options = pool.templates_for(cap);
            options[rng.gen_range(0..options.len())].clone()
        })
        .collect();
    let mut text = String::new();
    for (i, clause) in clauses.iter().enumerate() {
        if i > 0 {
            text.push_str(". ");
            if conjunction_style != NO_CONJUNCTION {
                text.push_str(&pool.conjunctions[conjunction_style as usize]);
                text.push(' ');
            }
        }
        text.push_str(clause);
    }
    text.push_str(". ");
    text.push_str(&pool.stop_clauses[stop_clause as usize]);
    InstructionTemplate {
        capabilities: capabilities.to_vec(),
        text,
        conjunction_style,
        stop_clause,
    }
}

/// Formats a scene point as `(x, up, y)` with two decimals.
fn format_point(x: f64, z: f64, y: f64) -> String {
    format!("({x:.2}, {z:.2}, {y:.2})")
}

/// Grounds a template's placeholders against the sub-goal sequence and
/// prefixes the initial-state clause. Deterministic in its inputs.
pub fn instantiate_instruction(
    template: &InstructionTemplate,
    subgoals: &[SubGoal],
    start: &Pose,
    episode_id: u64,
) -> Result<String, GenError> {
    if template.capabilities.len() != subgoals.len()
        || template
            .capabilities
            .iter()
            .zip(subgoals)
            .any(|(c, s)| *c != s.capability)
    {
        return Err(GenError::TemplateMismatch(format!(
            "template capabilities {:?} vs sub-goals {:?}",
            template.capabilities,
            subgoals.iter().map(|s| s.capability).collect::<Vec<_>>()
        )));
    }
    let (dx, dy) = start.direction();
    let mut out = format!(
        "Your current position is {} and your current orientation is {}. ",
        format_point(start.x, 0.0, start.y),
        format_point(dx, 0.0, dy)
    );
    let mut rest = template.text.as_str();
    for (idx, subgoal) in subgoals.iter().enumerate() {
        let marker = format!("{{{}}}", subgoal.capability.placeholder());
        let at = rest.find(&marker).ok_or_else(|| {
            GenError::TemplateMismatch(format!(
                "placeholder {marker} missing for sub-goal {idx}"
            ))
        })?;
        out.push_str(&rest[..at]);
        let grounded = match (&subgoal.target, subgoal.capability) {
            (SubGoalTarget::Point { x, y, z }, Capability::PointNav) => {
                format_point(*x, *z, *y)
            }
            (SubGoalTarget::Object { category, .. }, Capability::ObjNav) => category.clone(),
            (SubGoalTarget::GoalPose { .. }, Capability::ImgNav) => {
                format!("<ImageNav:{episode_id}.{idx}>")
            }
            (SubGoalTarget::Object { .. }, Capability::InsImgNav) => {
                format!("<InstanceImageNav:{episode_id}.{idx}>")
            }
            (SubGoalTarget::Waypoints { directions, .. }, Capability::VLN) => directions.clone(),
            (target, cap) => {
                return Err(GenError::TemplateMismatch(format!(
                    "sub-goal {idx}: target {target:?} does not fit capability {cap}"
                )))
            }
        };
        out.push_str(&grounded);
        rest = &rest[at + marker.len()..];
    }
    if let Some(at) = rest.find('{') {
        return Err(GenError::TemplateMismatch(format!(
            "unresolved placeholder at tail position {at}"
        )));
    }
    out.push_str(rest);
    Ok(out)
}
