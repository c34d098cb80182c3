use std::collections::BTreeSet;
use std::fmt::Write;

use super::mustpass::Augmented;
use crate::llm::{LlmError, LlmRequest};

pub const TASK_HEADING: &str = "# Task Description";
pub const CRITERIA_HEADING: &str = "# Analysis Criteria";
pub const OUTPUT_HEADING: &str = "# Output Specification";
pub const REFERENCE_HEADING: &str = "# Additional Legitimate Domains";
pub const INPUT_HEADING: &str = "# Input Domains";
pub const FEEDBACK_HEADING: &str = "# Reviewer Feedback";
/// Each feedback line reads `Previous attempt N was rejected: <text>`.
pub const REJECTION_PREFIX: &str = "Previous attempt";

const TASK: &str = "\
You are a security analyst who reviews newly registered or newly observed domain names and flags the ones built to impersonate a legitimate brand.

Every input domain is given as a record with three fields:
- s: the subdomain part, empty when there is none
- d: the registrable label
- sx: the public suffix
For example, login.secure.example.co.uk is {\"s\": \"login.secure\", \"d\": \"example\", \"sx\": \"co.uk\"}.

Work through the input in this order:
1. Read every record; do not skip any.
2. Compare each name with well-known brands, including the legitimate domains listed in the request.
3. Decide whether the name imitates a brand and which technique it relies on.
4. Report only the names that imitate a brand, together with the legitimate domain they target.";

const CRITERIA: &str = "\
1. Typo: a keyboard slip on the brand label, such as a missing, doubled, swapped or neighbouring key. Example: faecbook.com for facebook.com.
2. Combo: the brand label joined with extra words, with or without hyphens. Example: amazon-support.com for amazon.com.
3. Homo: characters replaced by visually similar ones, including other scripts encoded as punycode. Example: xn--pple-43d.com for apple.com.
4. Bit: one character differs by a single flipped bit of its ASCII code. Example: micrmsoft.com for microsoft.com.
5. Sound: a label that is pronounced like the brand. Example: eggsample.com for example.com.
6. TLD: the exact brand label under a different public suffix. Example: netflix.shop for netflix.com.
7. Level: the brand domain placed inside the subdomain of another registrable domain. Example: paypal.com.account-check.net for paypal.com.
8. Hybrid: two or more of the techniques above used together in one name. Example: login.micros0ft-update.top for microsoft.com.";

const OUTPUT: &str = "\
Reply with one JSON array and nothing else. Each element describes one suspicious input domain and has exactly these keys:
- s, d, sx: copied unchanged from the input record
- type: one of typo, combo, homo, bit, sound, tld, level, hybrid
- l: the registrable legitimate domain being imitated, for example amazon.com
Reply with [] when no input domain imitates a brand.";

/// Builds the request for one attempt. `references` are listed once each in
/// sorted order; `feedback` lines are appended under their own heading.
pub fn build_prompt<S: AsRef<str>>(
    augmented: &Augmented,
    references: &[S],
    feedback: &[String],
    max_output_tokens: u32,
    temperature: f64,
) -> Result<LlmRequest, LlmError> {
    if augmented.entries.is_empty() {
        return Err(LlmError::InvalidRequest("empty chunk".into()));
    }
    let system = format!("{TASK_HEADING}\n{TASK}\n");
    let refs: BTreeSet<&str> = references.iter().map(AsRef::as_ref).collect();
    let mut user = String::with_capacity(4096 + augmented.entries.len() * 64);
    let _ = write!(user, "{CRITERIA_HEADING}\n{CRITERIA}\n\n{OUTPUT_HEADING}\n{OUTPUT}\n\n{REFERENCE_HEADING}\n");
    for r in &refs {
        user.push_str(r);
        user.push('\n');
    }
    let _ = write!(user, "\n{INPUT_HEADING}\n[\n");
    let rows: Vec<String> = augmented
        .entries
        .iter()
        .map(|e| serde_json::to_string(&e.fqdn().to_structured()).expect("structured names serialize"))
        .collect();
    user.push_str(&rows.join(",\n"));
    user.push_str("\n]\n");
    if !feedback.is_empty() {
        let _ = write!(user, "\n{FEEDBACK_HEADING}\n");
        for line in feedback {
            user.push_str(line);
            user.push('\n');
        }
    }
    LlmRequest::new(system, user, max_output_tokens, temperature)
}

/// The feedback line for a rejected attempt.
pub fn feedback_line(attempt: u32, text: &str) -> String {
    format!("{REJECTION_PREFIX} {attempt} was rejected: {text}")
}
