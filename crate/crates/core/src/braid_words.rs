//! Classical and loop braid words: parsing, serialization, closure components
//! and the per-interval permutation data used by the strand pipeline.
//!
//! Text grammar: whitespace separated tokens `s<i>`, `s<i>^-1`, `r<i>`, `r<i>^-1`.
//! The strand count is always supplied by the caller.
//!
//! Naming follows the loop braid convention used throughout this crate: `s<i>`
//! (sigma) is the pass-through move where ring i travels through ring i+1, and
//! `r<i>` (rho) is the exchange move that behaves like a classical crossing.
//! Several references swap the two letters.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BraidError {
    #[error("malformed token {token:?} at position {position}")]
    Malformed { token: String, position: usize },
    #[error("generator index {index} out of range for {strands} strands")]
    IndexOutOfRange { index: usize, strands: usize },
    #[error("strand count must be positive")]
    NoStrands,
    #[error("rho generators are not allowed in a classical word (token {position})")]
    RhoInClassical { position: usize },
    #[error("invalid braid JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Sigma,
    Rho,
}

/// A generator `σ_i^{±1}` of the classical braid group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClassicalToken {
    pub index: usize,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LoopToken {
    pub kind: GeneratorKind,
    pub index: usize,
    pub sign: i8,
}

impl LoopToken {
    /// `ρ_i` is an involution, so its inverse collapses onto it.
    pub fn normalized(self) -> LoopToken {
        match self.kind {
            GeneratorKind::Rho => LoopToken { sign: 1, ..self },
            GeneratorKind::Sigma => self,
        }
    }
}

/// Anything that reads as a sequence of adjacent transpositions on `s` strands.
pub trait BraidWord {
    fn strand_count(&self) -> usize;
    /// Generator index of every token, left to right.
    fn generator_indices(&self) -> Vec<usize>;
    /// Over/under sign of every token as a crossing in the core diagram.
    /// Sigma tokens of a loop word carry their pass-through sign.
    fn crossing_signs(&self) -> Vec<i8>;
    /// `Some(kind)` per token for loop words, `None` for classical ones.
    fn kinds(&self) -> Option<Vec<GeneratorKind>>;

    fn len(&self) -> usize {
        self.generator_indices().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalBraidWord {
    strands: usize,
    tokens: Vec<ClassicalToken>,
}

impl ClassicalBraidWord {
    pub fn new(strands: usize, tokens: Vec<ClassicalToken>) -> Result<Self, BraidError> {
        check_tokens(strands, tokens.iter().map(|t| t.index))?;
        Ok(ClassicalBraidWord { strands, tokens })
    }

    pub fn tokens(&self) -> &[ClassicalToken] {
        &self.tokens
    }

    pub fn to_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| token_text('s', t.index, t.sign))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The loop word obtained by thickening every strand into a ring, with
    /// every crossing kept classical.
    pub fn to_loop_word(&self) -> LoopBraidWord {
        let tokens = self
            .tokens
            .iter()
            .map(|t| LoopToken {
                kind: GeneratorKind::Rho,
                index: t.index,
                sign: t.sign,
            })
            .collect();
        LoopBraidWord::new(self.strands, tokens).expect("indices already validated")
    }
}

impl BraidWord for ClassicalBraidWord {
    fn strand_count(&self) -> usize {
        self.strands
    }
    fn generator_indices(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.index).collect()
    }
    fn crossing_signs(&self) -> Vec<i8> {
        self.tokens.iter().map(|t| t.sign).collect()
    }
    fn kinds(&self) -> Option<Vec<GeneratorKind>> {
        None
    }
}

impl fmt::Display for ClassicalBraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Loop braid word. `tokens` are normalized (`ρ_i^{-1}` stored as `ρ_i`);
/// the tokens as written are kept so that serialization round-trips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopBraidWord {
    strands: usize,
    tokens: Vec<LoopToken>,
    written: Vec<LoopToken>,
}

impl LoopBraidWord {
    pub fn new(strands: usize, written: Vec<LoopToken>) -> Result<Self, BraidError> {
        check_tokens(strands, written.iter().map(|t| t.index))?;
        let tokens = written.iter().map(|t| t.normalized()).collect();
        Ok(LoopBraidWord {
            strands,
            tokens,
            written,
        })
    }

    pub fn tokens(&self) -> &[LoopToken] {
        &self.tokens
    }

    pub fn written_tokens(&self) -> &[LoopToken] {
        &self.written
    }

    /// Text as originally written (inverse rho signs preserved).
    pub fn to_text(&self) -> String {
        render_loop(&self.written)
    }

    pub fn normalized_text(&self) -> String {
        render_loop(&self.tokens)
    }

    /// Core diagram of the rings, forgetting which crossings are pass-throughs.
    pub fn core_word(&self) -> ClassicalBraidWord {
        let tokens = self
            .tokens
            .iter()
            .map(|t| ClassicalToken {
                index: t.index,
                sign: t.sign,
            })
            .collect();
        ClassicalBraidWord {
            strands: self.strands,
            tokens,
        }
    }
}

impl BraidWord for LoopBraidWord {
    fn strand_count(&self) -> usize {
        self.strands
    }
    fn generator_indices(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.index).collect()
    }
    fn crossing_signs(&self) -> Vec<i8> {
        self.tokens.iter().map(|t| t.sign).collect()
    }
    fn kinds(&self) -> Option<Vec<GeneratorKind>> {
        Some(self.tokens.iter().map(|t| t.kind).collect())
    }
}

impl fmt::Display for LoopBraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn render_loop(tokens: &[LoopToken]) -> String {
    tokens
        .iter()
        .map(|t| {
            let letter = match t.kind {
                GeneratorKind::Sigma => 's',
                GeneratorKind::Rho => 'r',
            };
            token_text(letter, t.index, t.sign)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn token_text(letter: char, index: usize, sign: i8) -> String {
    if sign < 0 {
        format!("{letter}{index}^-1")
    } else {
        format!("{letter}{index}")
    }
}

fn check_tokens(strands: usize, indices: impl Iterator<Item = usize>) -> Result<(), BraidError> {
    if strands == 0 {
        return Err(BraidError::NoStrands);
    }
    for index in indices {
        if index == 0 || index >= strands {
            return Err(BraidError::IndexOutOfRange { index, strands });
        }
    }
    Ok(())
}

fn parse_token(token: &str, position: usize) -> Result<LoopToken, BraidError> {
    let malformed = || BraidError::Malformed {
        token: token.to_string(),
        position,
    };
    let mut chars = token.chars();
    let kind = match chars.next() {
        Some('s') => GeneratorKind::Sigma,
        Some('r') => GeneratorKind::Rho,
        _ => return Err(malformed()),
    };
    let rest = chars.as_str();
    let (digits, sign) = match rest.strip_suffix("^-1") {
        Some(d) => (d, -1),
        None => (rest, 1),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let index = digits.parse::<usize>().map_err(|_| malformed())?;
    Ok(LoopToken { kind, index, sign })
}

fn parse_tokens(text: &str) -> Result<Vec<LoopToken>, BraidError> {
    text.split_whitespace()
        .enumerate()
        .map(|(pos, tok)| parse_token(tok, pos))
        .collect()
}

pub fn parse_classical_word(text: &str, strands: usize) -> Result<ClassicalBraidWord, BraidError> {
    let parsed = parse_tokens(text)?;
    let mut tokens = Vec::with_capacity(parsed.len());
    for (position, t) in parsed.into_iter().enumerate() {
        if t.kind == GeneratorKind::Rho {
            return Err(BraidError::RhoInClassical { position });
        }
        tokens.push(ClassicalToken {
            index: t.index,
            sign: t.sign,
        });
    }
    ClassicalBraidWord::new(strands, tokens)
}

pub fn parse_loop_word(text: &str, strands: usize) -> Result<LoopBraidWord, BraidError> {
    LoopBraidWord::new(strands, parse_tokens(text)?)
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
struct TokenJson {
    kind: GeneratorKind,
    index: usize,
    sign: i8,
}

#[derive(Serialize, Deserialize)]
struct WordJson {
    strands: usize,
    tokens: Vec<TokenJson>,
}

fn check_sign(sign: i8) -> Result<(), BraidError> {
    if sign == 1 || sign == -1 {
        Ok(())
    } else {
        Err(BraidError::Json(format!(
            "sign must be 1 or -1, got {sign}"
        )))
    }
}

impl LoopBraidWord {
    pub fn to_json(&self) -> String {
        let doc = WordJson {
            strands: self.strands,
            tokens: self
                .written
                .iter()
                .map(|t| TokenJson {
                    kind: t.kind,
                    index: t.index,
                    sign: t.sign,
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("braid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self, BraidError> {
        let doc: WordJson =
            serde_json::from_str(text).map_err(|e| BraidError::Json(e.to_string()))?;
        let mut tokens = Vec::with_capacity(doc.tokens.len());
        for t in doc.tokens {
            check_sign(t.sign)?;
            tokens.push(LoopToken {
                kind: t.kind,
                index: t.index,
                sign: t.sign,
            });
        }
        LoopBraidWord::new(doc.strands, tokens)
    }
}

impl ClassicalBraidWord {
    pub fn to_json(&self) -> String {
        let doc = WordJson {
            strands: self.strands,
            tokens: self
                .tokens
                .iter()
                .map(|t| TokenJson {
                    kind: GeneratorKind::Sigma,
                    index: t.index,
                    sign: t.sign,
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("braid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self, BraidError> {
        let doc: WordJson =
            serde_json::from_str(text).map_err(|e| BraidError::Json(e.to_string()))?;
        let mut tokens = Vec::with_capacity(doc.tokens.len());
        for (position, t) in doc.tokens.into_iter().enumerate() {
            check_sign(t.sign)?;
            if t.kind == GeneratorKind::Rho {
                return Err(BraidError::RhoInClassical { position });
            }
            tokens.push(ClassicalToken {
                index: t.index,
                sign: t.sign,
            });
        }
        ClassicalBraidWord::new(doc.strands, tokens)
    }
}

// ---- signed singular words ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    SigmaPlus,
    SigmaMinus,
    Rho,
    RhoInverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SingularToken {
    pub kind: SingularKind,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedSingularWord {
    pub strand_count: usize,
    pub tokens: Vec<SingularToken>,
}

/// Core lines of a loop braid: pass-throughs become signed intersection
/// points, exchanges become (unsigned) classical crossings.
pub fn loop_to_signed_singular(word: &LoopBraidWord) -> SignedSingularWord {
    let tokens = word
        .tokens()
        .iter()
        .map(|t| {
            let kind = match (t.kind, t.sign) {
                (GeneratorKind::Sigma, s) if s > 0 => SingularKind::SigmaPlus,
                (GeneratorKind::Sigma, _) => SingularKind::SigmaMinus,
                (GeneratorKind::Rho, _) => SingularKind::Rho,
            };
            SingularToken {
                kind,
                index: t.index,
            }
        })
        .collect();
    SignedSingularWord {
        strand_count: word.strand_count(),
        tokens,
    }
}

// ---- permutations and components ----

/// Strand positions are 1-based throughout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentDecomposition {
    strand_count: usize,
    /// `components[c][j]` is the start position of strand `j` (0-based here,
    /// `j+1` in the usual numbering) of component `c`.
    components: Vec<Vec<usize>>,
}

impl ComponentDecomposition {
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn strand_count(&self) -> usize {
        self.strand_count
    }

    /// `s_C`.
    pub fn strands_in(&self, component: usize) -> usize {
        self.components[component].len()
    }

    pub fn start_position(&self, component: usize, strand: usize) -> usize {
        self.components[component][strand]
    }

    /// Inverse lookup: which (component, strand) starts at `position`.
    pub fn strand_at(&self, position: usize) -> (usize, usize) {
        for (c, cycle) in self.components.iter().enumerate() {
            if let Some(j) = cycle.iter().position(|&p| p == position) {
                return (c, j);
            }
        }
        panic!("position {position} not covered by decomposition")
    }

    /// All (component, strand) labels in component-major order.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(c, cycle)| (0..cycle.len()).map(move |j| (c, j)))
            .collect()
    }
}

/// Where the strand starting at each position ends up after the whole word.
/// `result[p-1]` is the end position of the strand starting at `p`.
pub fn closure_permutation<W: BraidWord + ?Sized>(word: &W) -> Vec<usize> {
    let s = word.strand_count();
    let mut at: Vec<usize> = (1..=s).collect();
    for i in word.generator_indices() {
        for p in at.iter_mut() {
            if *p == i {
                *p = i + 1;
            } else if *p == i + 1 {
                *p = i;
            }
        }
    }
    at
}

pub fn strand_components<W: BraidWord + ?Sized>(word: &W) -> ComponentDecomposition {
    let s = word.strand_count();
    let perm = closure_permutation(word);
    let mut seen = vec![false; s + 1];
    let mut components = Vec::new();
    for start in 1..=s {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut p = start;
        while !seen[p] {
            seen[p] = true;
            cycle.push(p);
            p = perm[p - 1];
        }
        components.push(cycle);
    }
    ComponentDecomposition {
        strand_count: s,
        components,
    }
}

/// One transposition `(i, i+1)` per interval, in time order.
pub fn interval_permutations<W: BraidWord + ?Sized>(word: &W) -> Vec<(usize, usize)> {
    word.generator_indices()
        .into_iter()
        .map(|i| (i, i + 1))
        .collect()
}

/// `schedule[k][p-1]`: diagram position at sample time `2πk/ℓ` of the strand
/// that starts at position `p`. Has `ℓ+1` rows; the last is the closure.
pub fn position_schedule<W: BraidWord + ?Sized>(word: &W) -> Vec<Vec<usize>> {
    let s = word.strand_count();
    let mut at: Vec<usize> = (1..=s).collect();
    let mut rows = vec![at.clone()];
    for i in word.generator_indices() {
        for p in at.iter_mut() {
            if *p == i {
                *p = i + 1;
            } else if *p == i + 1 {
                *p = i;
            }
        }
        rows.push(at.clone());
    }
    rows
}

// ---- random words ----

pub fn random_classical_word<R: Rng>(
    rng: &mut R,
    max_strands: usize,
    max_len: usize,
) -> ClassicalBraidWord {
    let strands = rng.gen_range(2..=max_strands.max(2));
    let len = rng.gen_range(1..=max_len.max(1));
    let tokens = (0..len)
        .map(|_| ClassicalToken {
            index: rng.gen_range(1..strands),
            sign: if rng.gen_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    ClassicalBraidWord::new(strands, tokens).expect("generated indices are in range")
}

pub fn random_loop_word<R: Rng>(rng: &mut R, max_strands: usize, max_len: usize) -> LoopBraidWord {
    let strands = rng.gen_range(2..=max_strands.max(2));
    let len = rng.gen_range(1..=max_len.max(1));
    let tokens = (0..len)
        .map(|_| LoopToken {
            kind: if rng.gen_bool(0.5) {
                GeneratorKind::Sigma
            } else {
                GeneratorKind::Rho
            },
            index: rng.gen_range(1..strands),
            sign: if rng.gen_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    LoopBraidWord::new(strands, tokens).expect("generated indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const WHITEHEAD: &str = "s1^-1 s2 s1^-1 s2 s1^-1";
    const LOOP_EXAMPLE: &str = "r1^-1 r2 s1 r2 r1^-1";

    #[test]
    fn whitehead_parses() {
        let w = parse_classical_word(WHITEHEAD, 3).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.tokens()[0], ClassicalToken { index: 1, sign: -1 });
        assert_eq!(w.to_text(), WHITEHEAD);
    }

    #[test]
    fn empty_word_is_identity() {
        let w = parse_classical_word("", 3).unwrap();
        assert!(w.is_empty());
        let d = strand_components(&w);
        assert_eq!(d.len(), 3);
        assert!(d.components().iter().all(|c| c.len() == 1));
        assert!(interval_permutations(&w).is_empty());
    }

    #[test]
    fn loop_example_parses() {
        let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.to_text(), LOOP_EXAMPLE);
        assert_eq!(w.normalized_text(), "r1 r2 s1 r2 r1");
    }

    #[test]
    fn rho_inverse_normalizes() {
        let w = parse_loop_word("r1^-1", 2).unwrap();
        assert_eq!(w.normalized_text(), "r1");
        assert_eq!(w.tokens()[0].sign, 1);
        assert_eq!(w.written_tokens()[0].sign, -1);
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(matches!(
            parse_classical_word("s3", 3),
            Err(BraidError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse_classical_word("s0", 3),
            Err(BraidError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            parse_classical_word("x1", 3),
            Err(BraidError::Malformed { .. })
        ));
        assert!(matches!(
            parse_classical_word("s1^2", 3),
            Err(BraidError::Malformed { .. })
        ));
        assert!(matches!(
            parse_classical_word("s", 3),
            Err(BraidError::Malformed { .. })
        ));
        assert!(matches!(
            parse_classical_word("r1", 3),
            Err(BraidError::RhoInClassical { .. })
        ));
        assert!(matches!(
            parse_loop_word("s1", 0),
            Err(BraidError::NoStrands)
        ));
    }

    #[test]
    fn whitehead_components() {
        let w = parse_classical_word(WHITEHEAD, 3).unwrap();
        let d = strand_components(&w);
        assert_eq!(d.components(), &[vec![1], vec![2, 3]]);
        assert_eq!(d.strands_in(0), 1);
        assert_eq!(d.strands_in(1), 2);
        assert_eq!(d.strand_at(3), (1, 1));
    }

    #[test]
    fn whitehead_schedule() {
        let w = parse_classical_word(WHITEHEAD, 3).unwrap();
        let rows = position_schedule(&w);
        let track = |p: usize| rows.iter().map(|r| r[p - 1]).collect::<Vec<_>>();
        assert_eq!(track(1), vec![1, 2, 3, 3, 2, 1]);
        assert_eq!(track(2), vec![2, 1, 1, 2, 3, 3]);
        assert_eq!(track(3), vec![3, 3, 2, 1, 1, 2]);
    }

    #[test]
    fn whitehead_interval_transpositions() {
        let w = parse_classical_word(WHITEHEAD, 3).unwrap();
        assert_eq!(
            interval_permutations(&w),
            vec![(1, 2), (2, 3), (1, 2), (2, 3), (1, 2)]
        );
    }

    #[test]
    fn singular_correspondence() {
        let w = parse_loop_word("s1", 2).unwrap();
        assert_eq!(
            loop_to_signed_singular(&w).tokens[0].kind,
            SingularKind::SigmaPlus
        );
        let w = parse_loop_word("s1^-1", 2).unwrap();
        assert_eq!(
            loop_to_signed_singular(&w).tokens[0].kind,
            SingularKind::SigmaMinus
        );
        let w = parse_loop_word("r1^-1", 2).unwrap();
        assert_eq!(
            loop_to_signed_singular(&w).tokens[0].kind,
            SingularKind::Rho
        );

        let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
        let kinds: Vec<_> = loop_to_signed_singular(&w)
            .tokens
            .iter()
            .map(|t| (t.kind, t.index))
            .collect();
        use SingularKind::*;
        assert_eq!(
            kinds,
            vec![(Rho, 1), (Rho, 2), (SigmaPlus, 1), (Rho, 2), (Rho, 1)]
        );
    }

    #[test]
    fn json_round_trip() {
        let w = parse_loop_word(LOOP_EXAMPLE, 3).unwrap();
        let back = LoopBraidWord::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        let c = parse_classical_word(WHITEHEAD, 3).unwrap();
        assert_eq!(ClassicalBraidWord::from_json(&c.to_json()).unwrap(), c);
        assert!(LoopBraidWord::from_json(
            r#"{"strands":2,"tokens":[{"kind":"sigma","index":1,"sign":2}]}"#
        )
        .is_err());
    }

    // Brute force: multiply permutation matrices as maps on positions.
    fn brute_cycles(s: usize, indices: &[usize]) -> Vec<Vec<usize>> {
        let mut sigma: Vec<usize> = (0..s).collect(); // sigma[start] = current position
        for &i in indices {
            let swap = |p: usize| {
                if p == i - 1 {
                    i
                } else if p == i {
                    i - 1
                } else {
                    p
                }
            };
            for v in sigma.iter_mut() {
                *v = swap(*v);
            }
        }
        let mut out = Vec::new();
        let mut used = vec![false; s];
        for a in 0..s {
            if used[a] {
                continue;
            }
            let mut c = vec![];
            let mut b = a;
            loop {
                used[b] = true;
                c.push(b + 1);
                b = sigma[b];
                if b == a {
                    break;
                }
            }
            out.push(c);
        }
        out
    }

    #[test]
    fn random_words_match_brute_force_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let w = random_loop_word(&mut rng, 6, 12);
            let d = strand_components(&w);
            let total: usize = d.components().iter().map(|c| c.len()).sum();
            assert_eq!(total, w.strand_count());
            assert_eq!(
                d.components(),
                brute_cycles(w.strand_count(), &w.generator_indices()).as_slice()
            );
            let back = parse_loop_word(&w.to_text(), w.strand_count()).unwrap();
            assert_eq!(back, w);
            // composing per-interval transpositions reproduces the closure
            let rows = position_schedule(&w);
            assert_eq!(rows.last().unwrap(), &closure_permutation(&w));
            // kinds and signs do not matter for the permutation
            assert_eq!(strand_components(&w.core_word()), d);
            let singular = loop_to_signed_singular(&w);
            assert_eq!(singular.tokens.len(), w.len());
            for (a, b) in singular.tokens.iter().zip(w.tokens()) {
                assert_eq!(a.index, b.index);
            }
        }
    }
}
