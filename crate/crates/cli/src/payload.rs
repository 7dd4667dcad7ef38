//! Text payloads of the resolve service.
//!
//! A request is a header stanza followed by a blank line and a status
//! document:
//!
//! ```text
//! Target: svc:org.x.S@[1.0.0,2.0.0)
//! Policy: minimal-units
//! Conflict: abort
//! Architecture: x86_64
//! Os: linux
//! Disk-KiB: 65536
//! Multi-Version: bundle
//! Records: 1
//!
//! Format: 1
//!
//! Name: org.b
//! ...
//! ```
//!
//! `Records` counts the install records in the status part, so a cut-off
//! payload is detected. A response is a header stanza (`Status: ok` or an
//! error status), a blank line, and then either the plan encoding or one
//! diagnostic per line.

use resolvit_core::model::PlatformProfile;
use resolvit_core::resolver::{ConflictPolicy, Target};
use resolvit_core::state::{parse_status, serialize_status, stanza, PlatformStatus};

use crate::config::{profile_fields, profile_from_fields, PROFILE_KEYS};
use crate::engine::{CheckOutcome, CheckRequest, Failure};

pub const CONTENT_TYPE: &str = "text/plain; charset=utf-8";

const REQUEST_KEYS: [&str; 4] = ["Target", "Policy", "Conflict", "Records"];

pub fn encode_request(req: &CheckRequest) -> String {
    let mut fields: Vec<(&str, String)> = vec![
        ("Target", req.target.to_string()),
        ("Policy", req.policy.clone()),
        ("Conflict", req.conflict_policy.to_string()),
    ];
    fields.extend(profile_fields(&req.profile));
    fields.push(("Records", req.status.records().len().to_string()));
    let borrowed: Vec<(&str, &str)> = fields.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let mut out = String::new();
    stanza::write(&mut out, &borrowed);
    out.push('\n');
    out.push_str(&serialize_status(&req.status));
    out
}

pub fn parse_request(text: &str) -> Result<CheckRequest, String> {
    if !text.ends_with('\n') {
        return Err("payload must end with a newline".into());
    }
    let (head, body) = match text.split_once("\n\n") {
        Some((h, b)) => (format!("{h}\n"), b),
        None => (text.to_string(), ""),
    };
    let stanzas = stanza::parse(&head).map_err(|e| format!("request header: {}", e.reason))?;
    let [header] = stanzas.as_slice() else {
        return Err("missing request header".into());
    };
    if let Some((k, _)) = header
        .fields
        .iter()
        .find(|(k, _)| !REQUEST_KEYS.contains(&k.as_str()) && !PROFILE_KEYS.contains(&k.as_str()))
    {
        return Err(format!("unknown request field {k}"));
    }
    let need = |key: &str| header.get(key).ok_or_else(|| format!("missing {key}"));
    let target: Target = need("Target")?
        .parse()
        .map_err(|e| format!("bad Target: {e}"))?;
    let conflict_policy: ConflictPolicy = need("Conflict")?
        .parse()
        .map_err(|e| format!("bad Conflict: {e}"))?;
    let records: usize = need("Records")?
        .parse()
        .map_err(|_| "bad Records".to_string())?;
    let profile: PlatformProfile = profile_from_fields(&header.fields)?;
    let status: PlatformStatus = parse_status(body).map_err(|e| format!("status: {e}"))?;
    if status.records().len() != records {
        return Err(format!(
            "status holds {} records, header announced {records}",
            status.records().len()
        ));
    }
    Ok(CheckRequest {
        target,
        profile,
        status,
        policy: need("Policy")?.to_string(),
        conflict_policy,
    })
}

fn header(fields: &[(&str, String)]) -> String {
    let borrowed: Vec<(&str, &str)> = fields.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let mut out = String::new();
    stanza::write(&mut out, &borrowed);
    out.push('\n');
    out
}

pub fn encode_outcome(outcome: &CheckOutcome) -> String {
    let s = &outcome.resolution.solution;
    let mut fields = vec![
        ("Status", "ok".to_string()),
        ("Plan-SHA256", outcome.plan.plan_hash().to_string()),
        ("Actions", outcome.plan.len().to_string()),
        ("Disk-KiB", s.total_disk_kib.to_string()),
        ("Cost", s.total_cost.to_string()),
        ("Considered", outcome.resolution.considered.to_string()),
    ];
    if !outcome.resolution.conflicts.is_empty() {
        let list: Vec<String> = outcome
            .resolution
            .conflicts
            .iter()
            .map(ToString::to_string)
            .collect();
        fields.push(("Replaces", list.join("; ")));
    }
    header(&fields) + &outcome.plan.encode()
}

pub fn error_status(code: i32) -> &'static str {
    match code {
        crate::engine::EXIT_NO_SOLUTION => "no-solution",
        crate::engine::EXIT_CONFLICT => "conflict",
        crate::engine::EXIT_REPOSITORY => "repository-error",
        _ => "bad-request",
    }
}

pub fn encode_failure(f: &Failure) -> String {
    let fields = [
        ("Status", error_status(f.code).to_string()),
        ("Exit", f.code.to_string()),
        ("Error", f.message.replace('\n', " ")),
    ];
    let mut out = header(&fields);
    for d in &f.details {
        out.push_str(d);
        out.push('\n');
    }
    out
}

/// Splits a response into its header fields and body.
pub fn split_response(text: &str) -> Option<(Vec<(String, String)>, &str)> {
    let (head, body) = text.split_once("\n\n")?;
    let stanzas = stanza::parse(&format!("{head}\n")).ok()?;
    let [one] = stanzas.as_slice() else {
        return None;
    };
    Some((one.fields.clone(), body))
}

/// The plan part of an `ok` response, as sent.
pub fn response_plan(text: &str) -> Option<&str> {
    let (fields, body) = split_response(text)?;
    fields
        .iter()
        .any(|(k, v)| k == "Status" && v == "ok")
        .then_some(body)
}
