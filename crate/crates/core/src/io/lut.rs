use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_manifest, write_json, FORMAT_VERSION};
use crate::b1map::RatioTable;
use crate::error::{Error, Result};
use crate::seqsim::{RfConfig, SequenceTiming};

/// A B1 ratio table together with the pulses it was computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LutFile {
    pub format_version: u32,
    pub rf: RfConfig,
    pub flip_imaging: [f64; 2],
    pub table: RatioTable,
}

pub fn write_lut(path: &Path, table: &RatioTable, rf: &RfConfig, timing: &SequenceTiming) -> Result<()> {
    let f = LutFile {
        format_version: FORMAT_VERSION,
        rf: *rf,
        flip_imaging: timing.flip_imaging,
        table: table.clone(),
    };
    write_json(path, &f)
}

/// Reads a table and refuses it when it was built for other imaging pulses.
pub fn read_lut(path: &Path, rf: &RfConfig, timing: &SequenceTiming) -> Result<RatioTable> {
    let f: LutFile = read_manifest(path)?;
    if f.rf != *rf || f.flip_imaging != timing.flip_imaging {
        return Err(Error::Validation(format!(
            "{} was computed for different imaging pulses",
            path.display()
        )));
    }
    f.table.validate()?;
    Ok(f.table)
}
