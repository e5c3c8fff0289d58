//! On-disk scenario directories.
//!
//! ```text
//! <dir>/output.json        SV / OV attribute tokens
//! <dir>/ACM.txt            0/1 rows
//! <dir>/ACL.txt            object: subjects
//! <dir>/access_data.txt    one line per cell
//! <dir>/groundtruth.rules  rule-line grammar
//! <dir>/meta.json          id, seed, attempts, generation params
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;
use crate::generator::GenerationParams;
use crate::model::Scenario;

pub const ATTRIBUTES_FILE: &str = "output.json";
pub const ACM_FILE: &str = "ACM.txt";
pub const ACL_FILE: &str = "ACL.txt";
pub const ACCESS_DATA_FILE: &str = "access_data.txt";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.rules";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    id: String,
    seed: u64,
    attempts: usize,
    params: GenerationParams,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_scenario(scenario: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (acm, attrs) = formats::render_acm_input(scenario);
    write_file(&dir.join(ATTRIBUTES_FILE), &attrs)?;
    write_file(&dir.join(ACM_FILE), &acm)?;
    write_file(&dir.join(ACL_FILE), &formats::render_acl_text(&scenario.acm))?;
    write_file(
        &dir.join(ACCESS_DATA_FILE),
        &formats::render_access_data(scenario),
    )?;
    write_file(
        &dir.join(GROUND_TRUTH_FILE),
        &formats::emit_policy(&scenario.ground_truth),
    )?;
    let meta = Meta {
        id: scenario.id.clone(),
        seed: scenario.seed,
        attempts: scenario.attempts,
        params: scenario.params.clone(),
    };
    write_file(&dir.join(META_FILE), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

/// Loads a scenario directory and re-checks every scenario invariant.
pub fn read_scenario(dir: &Path) -> Result<Scenario> {
    let meta: Meta = serde_json::from_str(&read_file(&dir.join(META_FILE))?)?;
    let (subjects, objects) =
        formats::parse_attributes_json(&read_file(&dir.join(ATTRIBUTES_FILE))?)?;
    let acm = formats::parse_acm_text(&read_file(&dir.join(ACM_FILE))?)?;
    let ground_truth = formats::parse_rule_lines_with(
        &read_file(&dir.join(GROUND_TRUTH_FILE))?,
        formats::ParseOptions { strict: true },
    )?
    .policy;
    Scenario::new(
        meta.id,
        subjects,
        objects,
        ground_truth,
        acm,
        meta.params,
        meta.seed,
        meta.attempts,
    )
}
