//! Trace records emitted by the unifier and the elaborator.

use serde::Serialize;

use crate::diag::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Unify,
    Elab,
}

/// One step. `resource` follows the inference loop: 1 decomposition,
/// 2 pattern solving (or coercion insertion, for elab records),
/// 3 canonical hints, 4 reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub kind: TraceKind,
    pub constraint: String,
    pub resource: u8,
    pub action: String,
    pub result: String,
    pub span: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace records serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let r = TraceRecord {
            kind: TraceKind::Unify,
            constraint: "carrier ?0 ≡ int".into(),
            resource: 3,
            action: "hint IntGroup".into(),
            result: "success".into(),
            span: Span::new(3, 8, 1, 4),
            hint: Some("IntGroup".into()),
            note: None,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["kind"], "unify");
        assert_eq!(v["resource"], 3);
        assert_eq!(v["hint"], "IntGroup");
        assert_eq!(v["span"]["line"], 1);
        assert!(v.get("note").is_none());
    }
}
