use super::adversary::EveRecord;
use super::RedTeamError;
use crate::bb84::SessionTranscript;
use crate::quantum::Basis;

/// Fraction of the pre-amplification key bits Eve knows with certainty.
///
/// A key bit is credited only when Eve measured that qubit in Alice's
/// preparation basis. Conjugate-basis measurements earn nothing. Returns 0 for
/// an empty key.
pub fn eve_information(t: &SessionTranscript, ledger: &[EveRecord]) -> Result<f64, RedTeamError> {
    let mut by_index: Vec<Option<&EveRecord>> = vec![None; t.n_qubits];
    for rec in ledger {
        if !rec.is_well_formed() {
            return Err(RedTeamError::Structural(format!(
                "malformed ledger record at qubit {}",
                rec.qubit_index
            )));
        }
        let slot = by_index.get_mut(rec.qubit_index).ok_or_else(|| {
            RedTeamError::Structural(format!(
                "ledger index {} beyond transcript length {}",
                rec.qubit_index, t.n_qubits
            ))
        })?;
        if slot.replace(rec).is_some() {
            return Err(RedTeamError::Structural(format!(
                "duplicate ledger record for qubit {}",
                rec.qubit_index
            )));
        }
    }
    let key = t.key_indices();
    if key.is_empty() {
        return Ok(0.0);
    }
    let credited = key
        .iter()
        .filter(|&&i| {
            let alice = Basis::from_bit(t.alice_bases.get(i));
            by_index[i].and_then(|r| r.measured_basis) == Some(alice)
        })
        .count();
    Ok(credited as f64 / key.len() as f64)
}
