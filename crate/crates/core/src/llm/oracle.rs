use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{respond, ChatBackend, LlmError, LlmRequest, LlmResponse};
use crate::domain::StructuredName;
use crate::squat::Detector;
use crate::trv::prompt::{FEEDBACK_HEADING, INPUT_HEADING, REJECTION_PREFIX};

/// Per-reply fault probabilities for the oracle. All rates lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultProfile {
    /// Chance of omitting each true finding.
    pub drop: f64,
    /// Chance of adding one finding for a name absent from the input.
    pub hallucinate: f64,
    /// Chance of replying with prose and truncated JSON.
    pub corrupt_format: f64,
    /// Chance of pointing one finding at a target that does not exist.
    pub fabricate_target: f64,
    pub seed: u64,
    /// Faults fire only on attempts `1..=active_attempts`; 0 means every
    /// attempt.
    pub active_attempts: u32,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile::NONE
    }
}

impl FaultProfile {
    pub const NONE: FaultProfile = FaultProfile {
        drop: 0.0,
        hallucinate: 0.0,
        corrupt_format: 0.0,
        fabricate_target: 0.0,
        seed: 0,
        active_attempts: 0,
    };

    pub fn validate(&self) -> Result<(), String> {
        for (name, rate) in [
            ("drop", self.drop),
            ("hallucinate", self.hallucinate),
            ("corrupt_format", self.corrupt_format),
            ("fabricate_target", self.fabricate_target),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("fault rate {name} = {rate} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn active(&self, attempt: u32) -> bool {
        self.active_attempts == 0 || attempt <= self.active_attempts
    }
}

#[derive(Debug, Clone, Serialize)]
struct Finding {
    s: String,
    d: String,
    sx: String,
    #[serde(rename = "type")]
    kind: &'static str,
    l: String,
}

/// A stand-in model that answers with the rule-based detector and injects
/// faults on a seeded schedule. The same request always yields the same
/// reply.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    detector: Arc<Detector>,
    faults: FaultProfile,
}

fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// The JSON text under the input heading, up to the next heading.
fn input_section(user_text: &str) -> Option<&str> {
    let start = user_text.find(INPUT_HEADING)? + INPUT_HEADING.len();
    let rest = &user_text[start..];
    let end = rest.find("\n# ").unwrap_or(rest.len());
    Some(rest[..end].trim())
}

fn attempt_number(user_text: &str) -> u32 {
    let Some(start) = user_text.find(FEEDBACK_HEADING) else { return 1 };
    let rejected = user_text[start..]
        .lines()
        .filter(|l| l.trim_start().starts_with(REJECTION_PREFIX))
        .count();
    rejected as u32 + 1
}

impl OracleBackend {
    pub fn new(detector: Arc<Detector>, faults: FaultProfile) -> Result<OracleBackend, LlmError> {
        faults.validate().map_err(LlmError::InvalidRequest)?;
        Ok(OracleBackend { detector, faults })
    }

    fn findings(&self, inputs: &[StructuredName]) -> Vec<Finding> {
        inputs
            .iter()
            .filter_map(|name| {
                let fqdn = name.to_fqdn().ok()?;
                let det = self.detector.extended(&fqdn)?;
                Some(Finding {
                    s: name.s.clone(),
                    d: name.d.clone(),
                    sx: name.sx.clone(),
                    kind: det.kind.name(),
                    l: self.detector.brands().get(det.brand).registrable().to_string(),
                })
            })
            .collect()
    }

    fn answer(&self, user_text: &str) -> String {
        let inputs: Vec<StructuredName> = match input_section(user_text).map(serde_json::from_str) {
            Some(Ok(v)) => v,
            _ => return "I could not read the input domains in this request.".into(),
        };
        let mut findings = self.findings(&inputs);
        if !self.faults.active(attempt_number(user_text)) {
            return serde_json::to_string(&findings).expect("findings serialize");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.faults.seed ^ fnv1a(user_text));
        let corrupt = rng.gen_bool(self.faults.corrupt_format);
        let hallucinate = rng.gen_bool(self.faults.hallucinate);
        let fabricate = rng.gen_bool(self.faults.fabricate_target);
        let tag: u32 = rng.gen();
        findings.retain(|_| !rng.gen_bool(self.faults.drop));
        if fabricate && !findings.is_empty() {
            let i = tag as usize % findings.len();
            let label = findings[i].l.split('.').next().unwrap_or("brand").to_string();
            findings[i].l = format!("{label}{tag:08x}.invalid");
        }
        if hallucinate {
            let base = inputs.first().map_or("brand", |n| n.d.as_str());
            let mut d = format!("{base}{tag:06x}");
            while inputs.iter().any(|n| n.d == d) {
                d.push('x');
            }
            let l = self.detector.brands().iter().next().map_or("example.com", |b| b.registrable()).to_string();
            findings.push(Finding { s: String::new(), d, sx: "com".into(), kind: "typo", l });
        }
        let json = serde_json::to_string(&findings).expect("findings serialize");
        if corrupt {
            let cut: String = json.chars().take(json.chars().count() / 2).collect();
            return format!("Sure! Here are the suspicious domains I found:\n{cut}");
        }
        json
    }
}

impl ChatBackend for OracleBackend {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = Instant::now();
        let text = self.answer(&request.user_text);
        Ok(respond(request, text, started))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psl::SuffixRules;
    use crate::squat::{BrandSet, GeneratorTables};

    fn detector() -> Arc<Detector> {
        let brands = BrandSet::from_domains(&["google.com", "amazon.com", "example.com"], SuffixRules::bundled()).unwrap();
        Arc::new(Detector::new(brands, &GeneratorTables::bundled()))
    }

    fn request(inputs: &str, feedback: &str) -> LlmRequest {
        let user = format!("# Analysis Criteria\n...\n{INPUT_HEADING}\n{inputs}\n{feedback}");
        LlmRequest::new("persona".into(), user, 1000, 0.0).unwrap()
    }

    fn parse(text: &str) -> Vec<serde_json::Value> {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn answers_with_detector_findings() {
        let o = OracleBackend::new(detector(), FaultProfile::NONE).unwrap();
        let r = o
            .chat(&request(r#"[{"s":"login","d":"amaz0n","sx":"com"},{"s":"www","d":"wikipedia","sx":"org"}]"#, ""))
            .unwrap();
        let out = parse(&r.text);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0]["d"], "amaz0n");
        assert_eq!(out[0]["l"], "amazon.com");
    }

    #[test]
    fn benign_input_gives_empty_array() {
        let o = OracleBackend::new(detector(), FaultProfile::NONE).unwrap();
        let r = o.chat(&request(r#"[{"s":"","d":"wikipedia","sx":"org"},{"s":"mail","d":"google","sx":"com"}]"#, "")).unwrap();
        assert_eq!(r.text, "[]");
    }

    #[test]
    fn hallucination_adds_absent_domain() {
        let faults = FaultProfile { hallucinate: 1.0, ..FaultProfile::NONE };
        let o = OracleBackend::new(detector(), faults).unwrap();
        let r = o.chat(&request(r#"[{"s":"","d":"wikipedia","sx":"org"}]"#, "")).unwrap();
        let out = parse(&r.text);
        assert!(out.iter().any(|f| f["d"] != "wikipedia"));
    }

    #[test]
    fn same_seed_same_reply() {
        let faults = FaultProfile { drop: 0.5, hallucinate: 0.5, fabricate_target: 0.5, seed: 9, ..FaultProfile::NONE };
        let a = OracleBackend::new(detector(), faults).unwrap();
        let b = OracleBackend::new(detector(), faults).unwrap();
        let req = request(r#"[{"s":"","d":"amazom","sx":"com"},{"s":"","d":"gogle","sx":"com"}]"#, "");
        assert_eq!(a.chat(&req).unwrap().text, b.chat(&req).unwrap().text);
    }

    #[test]
    fn unreadable_request_gets_corrupt_reply() {
        let o = OracleBackend::new(detector(), FaultProfile::NONE).unwrap();
        let req = LlmRequest::new("p".into(), "no inputs here".into(), 10, 0.0).unwrap();
        let text = o.chat(&req).unwrap().text;
        assert!(serde_json::from_str::<serde_json::Value>(&text).is_err());
    }

    #[test]
    fn faults_respect_active_attempts() {
        let faults = FaultProfile { corrupt_format: 1.0, active_attempts: 1, ..FaultProfile::NONE };
        let o = OracleBackend::new(detector(), faults).unwrap();
        let inputs = r#"[{"s":"","d":"amazom","sx":"com"}]"#;
        assert!(serde_json::from_str::<serde_json::Value>(&o.chat(&request(inputs, "")).unwrap().text).is_err());
        let fb = format!("{FEEDBACK_HEADING}\n{REJECTION_PREFIX} 1 was rejected: bad format");
        assert_eq!(parse(&o.chat(&request(inputs, &fb)).unwrap().text).len(), 1);
    }

    #[test]
    fn fabricated_target_is_not_a_brand() {
        let faults = FaultProfile { fabricate_target: 1.0, ..FaultProfile::NONE };
        let o = OracleBackend::new(detector(), faults).unwrap();
        let out = parse(&o.chat(&request(r#"[{"s":"","d":"amazom","sx":"com"}]"#, "")).unwrap().text);
        assert!(out[0]["l"].as_str().unwrap().ends_with(".invalid"));
    }

    #[test]
    fn rejects_bad_rates() {
        let faults = FaultProfile { drop: 1.5, ..FaultProfile::NONE };
        assert!(OracleBackend::new(detector(), faults).is_err());
    }
}
