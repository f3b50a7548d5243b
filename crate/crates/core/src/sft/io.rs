use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LocallyConstantPotential, SftError, TransitionMatrix};

/// An SFT together with a locally constant potential, as read from JSON:
/// `{"d": 2, "rows": [[1,1],[1,0]], "potential": {"depth": 1, "values": {"0": 1.0, "1": 0.0}}}`.
///
/// Words are digit strings, which limits the alphabet to ten states. A
/// missing `potential` means `φ ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SftDocument {
    pub matrix: TransitionMatrix,
    pub potential: LocallyConstantPotential,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    d: usize,
    rows: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    potential: Option<RawPotential>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    depth: usize,
    values: BTreeMap<String, f64>,
}

pub fn parse_sft_json(text: &str) -> Result<SftDocument, SftError> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|e| SftError::Document(e.to_string()))?;
    if raw.d == 0 || raw.d > 10 {
        return Err(SftError::Document(format!("d = {} is outside 1..=10", raw.d)));
    }
    if raw.rows.len() != raw.d {
        return Err(SftError::Document(format!("d = {} but {} rows given", raw.d, raw.rows.len())));
    }
    let matrix = TransitionMatrix::new(raw.rows)?;
    let potential = match raw.potential {
        None => LocallyConstantPotential::zero(&matrix),
        Some(p) => {
            let mut values = BTreeMap::new();
            for (key, v) in p.values {
                let word = parse_word(&key, raw.d)?;
                if values.insert(word, v).is_some() {
                    return Err(SftError::Document(format!("duplicate word {key:?}")));
                }
            }
            LocallyConstantPotential::new(&matrix, p.depth, values)?
        }
    };
    Ok(SftDocument { matrix, potential })
}

fn parse_word(key: &str, d: usize) -> Result<Vec<usize>, SftError> {
    key.chars()
        .map(|c| match c.to_digit(10) {
            Some(s) if (s as usize) < d => Ok(s as usize),
            _ => Err(SftError::Document(format!("word {key:?} has a symbol outside 0..{d}"))),
        })
        .collect()
}

impl SftDocument {
    pub fn to_json(&self) -> Result<String, SftError> {
        if self.matrix.d() > 10 {
            return Err(SftError::Document("digit-string words need d <= 10".into()));
        }
        let values = self
            .potential
            .iter()
            .map(|(w, v)| (w.iter().map(|s| char::from(b'0' + *s as u8)).collect(), v))
            .collect();
        let raw = RawDocument {
            d: self.matrix.d(),
            rows: self.matrix.rows(),
            potential: Some(RawPotential { depth: self.potential.depth(), values }),
        };
        serde_json::to_string_pretty(&raw).map_err(|e| SftError::Document(e.to_string()))
    }
}
