use super::MetricsError;

/// A typed span over inclusive token indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chunk {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_label(label: &str) -> Result<Bio<'_>, MetricsError> {
    if label == "O" {
        return Ok(Bio::Outside);
    }
    if let Some(ty) = label.strip_prefix("B-") {
        if !ty.is_empty() {
            return Ok(Bio::Begin(ty));
        }
    }
    if let Some(ty) = label.strip_prefix("I-") {
        if !ty.is_empty() {
            return Ok(Bio::Inside(ty));
        }
    }
    Err(MetricsError::BadLabel(label.to_string()))
}

/// Extract typed spans from a BIO label sequence.
///
/// `B-x` always opens a chunk; contiguous `I-x` extends the open chunk of
/// the same type; an `I-x` without a compatible open chunk opens a new one
/// (conlleval's orphan-begin rule); `O` or a type change closes.
pub fn extract_chunks<L: AsRef<str>>(labels: &[L]) -> Result<Vec<Chunk>, MetricsError> {
    let mut chunks = Vec::new();
    let mut open: Option<(String, usize)> = None; // (type, start)
    for (i, label) in labels.iter().enumerate() {
        match parse_label(label.as_ref())? {
            Bio::Outside => {
                if let Some((ty, start)) = open.take() {
                    chunks.push(Chunk {
                        label: ty,
                        start,
                        end: i - 1,
                    });
                }
            }
            Bio::Begin(ty) => {
                if let Some((prev, start)) = open.take() {
                    chunks.push(Chunk {
                        label: prev,
                        start,
                        end: i - 1,
                    });
                }
                open = Some((ty.to_string(), i));
            }
            Bio::Inside(ty) => match &open {
                Some((prev, _)) if prev == ty => {}
                _ => {
                    if let Some((prev, start)) = open.take() {
                        chunks.push(Chunk {
                            label: prev,
                            start,
                            end: i - 1,
                        });
                    }
                    open = Some((ty.to_string(), i));
                }
            },
        }
    }
    if let Some((ty, start)) = open {
        chunks.push(Chunk {
            label: ty,
            start,
            end: labels.len() - 1,
        });
    }
    Ok(chunks)
}
