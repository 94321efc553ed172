//! Horizon-label grammar: parsing, normalization and rendering.
//!
//! A label is a mandatory uppercase main symbol (`A`, `B`, `C`, ...) with an
//! optional lowercase prefix and suffix, e.g. `Ah`, `Bv`, `ilCv`. Transition
//! zones between two horizons are written as mixtures of two such labels. The
//! field notation uses several mixture operators (`+`, `-`, `°`); all of them
//! are normalized to `-`, e.g. `Ah-Bv`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use alloc::collections::BTreeSet;

/// The mixture operators accepted on input. Rendering always uses `-`.
pub const MIXTURE_OPERATORS: [char; 3] = ['+', '-', '°'];

/// An uppercase main horizon symbol, the first hierarchy level of the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MainSymbol(char);

impl MainSymbol {
    /// Wraps an uppercase ASCII letter.
    pub fn new(c: char) -> Result<Self, GrammarError> {
        if c.is_ascii_uppercase() {
            Ok(MainSymbol(c))
        } else {
            Err(GrammarError::InvalidMainSymbol { symbol: c })
        }
    }

    pub fn as_char(&self) -> char {
        self.0
    }
}

impl fmt::Display for MainSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The set of main symbols a parser accepts; configuration data, usually read
/// from a taxonomy file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(BTreeSet<MainSymbol>);

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(symbols: I) -> Result<Self, GrammarError> {
        let mut set = BTreeSet::new();
        for c in symbols {
            set.insert(MainSymbol::new(c)?);
        }
        if set.is_empty() {
            return Err(GrammarError::EmptyAlphabet);
        }
        Ok(Alphabet(set))
    }

    /// Accepts every uppercase ASCII letter as a main symbol. Useful when no
    /// taxonomy is at hand, e.g. when clustering raw label counts.
    pub fn universal() -> Self {
        Alphabet(('A'..='Z').map(MainSymbol).collect())
    }

    pub fn contains(&self, symbol: MainSymbol) -> bool {
        self.0.contains(&symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = MainSymbol> + '_ {
        self.0.iter().copied()
    }
}

/// A non-mixture label: lowercase prefix, main symbol, lowercase suffix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimpleLabel {
    prefix: String,
    main: MainSymbol,
    suffix: String,
}

impl SimpleLabel {
    pub fn new(prefix: &str, main: MainSymbol, suffix: &str) -> Result<Self, GrammarError> {
        for c in prefix.chars().chain(suffix.chars()) {
            if !c.is_ascii_lowercase() {
                return Err(GrammarError::MalformedLabel {
                    label: alloc::format!("{prefix}{main}{suffix}"),
                    reason: MalformedReason::IllegalCharacter(c),
                });
            }
        }
        Ok(SimpleLabel {
            prefix: prefix.to_string(),
            main,
            suffix: suffix.to_string(),
        })
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn main(&self) -> MainSymbol {
        self.main
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }
}

impl fmt::Display for SimpleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.prefix, self.main, self.suffix)
    }
}

/// A horizon label: either a single label or an ordered mixture of two labels
/// with distinct main symbols. The second mixture member is the dominant one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HorizonLabel {
    Simple(SimpleLabel),
    Mixture(SimpleLabel, SimpleLabel),
}

impl HorizonLabel {
    pub fn is_mixture(&self) -> bool {
        matches!(self, HorizonLabel::Mixture(..))
    }

    /// The main symbol this label counts towards. For mixtures that is the
    /// main symbol of the second (dominant) member.
    pub fn main_symbol(&self) -> MainSymbol {
        match self {
            HorizonLabel::Simple(s) => s.main(),
            HorizonLabel::Mixture(_, second) => second.main(),
        }
    }

    /// Canonical string form; mixtures are joined with `-`.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for HorizonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonLabel::Simple(s) => write!(f, "{s}"),
            HorizonLabel::Mixture(a, b) => write!(f, "{a}-{b}"),
        }
    }
}

/// Why a label string failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MalformedReason {
    Empty,
    NoMainSymbol,
    MultipleMainSymbols,
    IllegalCharacter(char),
    ChainedMixture,
    EmptyMember,
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedReason::Empty => write!(f, "label is empty"),
            MalformedReason::NoMainSymbol => write!(f, "no uppercase main symbol present"),
            MalformedReason::MultipleMainSymbols => {
                write!(f, "more than one uppercase main symbol in a member")
            }
            MalformedReason::IllegalCharacter(c) => write!(f, "illegal character '{c}'"),
            MalformedReason::ChainedMixture => write!(f, "more than one mixture operator"),
            MalformedReason::EmptyMember => write!(f, "empty mixture member"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("malformed label \"{label}\": {reason}")]
    MalformedLabel { label: String, reason: MalformedReason },
    #[error("unknown main symbol '{symbol}' in label \"{label}\"")]
    UnknownMainSymbol { label: String, symbol: char },
    #[error("'{symbol}' is not an uppercase ASCII letter")]
    InvalidMainSymbol { symbol: char },
    #[error("main-symbol alphabet is empty")]
    EmptyAlphabet,
}

/// Parses a label string against a main-symbol alphabet.
///
/// Mixture operators `+`, `-` and `°` are all accepted and normalized, so
/// `Ah+Bv`, `Ah-Bv` and `Ah°Bv` parse to the same value. A member containing
/// more than one uppercase letter is rejected rather than split greedily.
///
/// Mixtures whose members share a main symbol do parse: they occur among raw
/// field labels fed into clustering. The taxonomy builder rejects them, since
/// only mixtures of distinct main symbols are valid taxonomy leaves.
pub fn parse_label(s: &str, alphabet: &Alphabet) -> Result<HorizonLabel, GrammarError> {
    if s.is_empty() {
        return Err(GrammarError::MalformedLabel {
            label: String::new(),
            reason: MalformedReason::Empty,
        });
    }
    let members: Vec<&str> = s.split(|c| MIXTURE_OPERATORS.contains(&c)).collect();
    match members.as_slice() {
        [single] => parse_member(single, s, alphabet).map(HorizonLabel::Simple),
        [first, second] => {
            let first = parse_member(first, s, alphabet)?;
            let second = parse_member(second, s, alphabet)?;
            Ok(HorizonLabel::Mixture(first, second))
        }
        _ => Err(GrammarError::MalformedLabel {
            label: s.to_string(),
            reason: MalformedReason::ChainedMixture,
        }),
    }
}

fn parse_member(member: &str, label: &str, alphabet: &Alphabet) -> Result<SimpleLabel, GrammarError> {
    if member.is_empty() {
        return Err(GrammarError::MalformedLabel {
            label: label.to_string(),
            reason: MalformedReason::EmptyMember,
        });
    }
    let mut prefix = String::new();
    let mut suffix = String::new();
    let mut main: Option<char> = None;
    for c in member.chars() {
        if c.is_ascii_uppercase() {
            if main.is_some() {
                return Err(GrammarError::MalformedLabel {
                    label: label.to_string(),
                    reason: MalformedReason::MultipleMainSymbols,
                });
            }
            main = Some(c);
        } else if c.is_ascii_lowercase() {
            if main.is_some() {
                suffix.push(c);
            } else {
                prefix.push(c);
            }
        } else {
            return Err(GrammarError::MalformedLabel {
                label: label.to_string(),
                reason: MalformedReason::IllegalCharacter(c),
            });
        }
    }
    let main = main.ok_or_else(|| GrammarError::MalformedLabel {
        label: label.to_string(),
        reason: MalformedReason::NoMainSymbol,
    })?;
    let main = MainSymbol(main);
    if !alphabet.contains(main) {
        return Err(GrammarError::UnknownMainSymbol {
            label: label.to_string(),
            symbol: main.as_char(),
        });
    }
    Ok(SimpleLabel {
        prefix,
        main,
        suffix,
    })
}

/// Canonical string form of a label. Inverse of [`parse_label`].
pub fn render_label(label: &HorizonLabel) -> String {
    label.render()
}

/// The main symbol a label counts towards; see [`HorizonLabel::main_symbol`].
pub fn main_symbol(label: &HorizonLabel) -> MainSymbol {
    label.main_symbol()
}

/// A modifier restriction: the given prefix or suffix letter may not be
/// combined with the given main symbol (e.g. prefix `a` before `B`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierRule {
    pub main: MainSymbol,
    pub kind: ModifierKind,
    pub letter: char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModifierKind {
    Prefix,
    Suffix,
}

/// Optional table of forbidden modifier/main combinations. The grammar itself
/// accepts any lowercase modifiers; restrictions are enforced only when a
/// table is supplied by the taxonomy configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModifierRules {
    rules: Vec<ModifierRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("label \"{label}\": {kind} '{letter}' is not valid with main symbol '{main}'")]
pub struct RuleViolation {
    pub label: String,
    pub main: char,
    pub kind: &'static str,
    pub letter: char,
}

impl ModifierRules {
    pub fn new(rules: Vec<ModifierRule>) -> Self {
        ModifierRules { rules }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Checks every member of `label` against the table.
    pub fn check(&self, label: &HorizonLabel) -> Result<(), RuleViolation> {
        match label {
            HorizonLabel::Simple(s) => self.check_member(s, label),
            HorizonLabel::Mixture(a, b) => {
                self.check_member(a, label)?;
                self.check_member(b, label)
            }
        }
    }

    fn check_member(&self, member: &SimpleLabel, label: &HorizonLabel) -> Result<(), RuleViolation> {
        for rule in &self.rules {
            if rule.main != member.main() {
                continue;
            }
            let (field, kind): (&str, &'static str) = match rule.kind {
                ModifierKind::Prefix => (member.prefix(), "prefix"),
                ModifierKind::Suffix => (member.suffix(), "suffix"),
            };
            if field.contains(rule.letter) {
                return Err(RuleViolation {
                    label: label.render(),
                    main: member.main().as_char(),
                    kind,
                    letter: rule.letter,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet() -> Alphabet {
        Alphabet::new(['A', 'B', 'C', 'G', 'S']).unwrap()
    }

    fn parse(s: &str) -> HorizonLabel {
        parse_label(s, &alphabet()).unwrap()
    }

    #[test]
    fn parses_mixture_with_modifiers() {
        let label = parse("Ah-Bv");
        match &label {
            HorizonLabel::Mixture(a, b) => {
                assert_eq!((a.prefix(), a.main().as_char(), a.suffix()), ("", 'A', "h"));
                assert_eq!((b.prefix(), b.main().as_char(), b.suffix()), ("", 'B', "v"));
            }
            _ => panic!("expected mixture"),
        }
        assert_eq!(label.render(), "Ah-Bv");
    }

    #[test]
    fn parses_bare_main_symbol() {
        let label = parse("A");
        match &label {
            HorizonLabel::Simple(s) => {
                assert_eq!((s.prefix(), s.main().as_char(), s.suffix()), ("", 'A', ""));
            }
            _ => panic!("expected simple label"),
        }
    }

    #[test]
    fn normalizes_every_mixture_operator() {
        let plus = parse("ilC+Go");
        let minus = parse("ilC-Go");
        let degree = parse("ilC°Go");
        assert_eq!(plus, minus);
        assert_eq!(plus, degree);
        assert_eq!(plus.render(), "ilC-Go");
        match &plus {
            HorizonLabel::Mixture(a, b) => {
                assert_eq!((a.prefix(), a.main().as_char(), a.suffix()), ("il", 'C', ""));
                assert_eq!((b.prefix(), b.main().as_char(), b.suffix()), ("", 'G', "o"));
            }
            _ => panic!("expected mixture"),
        }
    }

    #[test]
    fn main_symbol_of_mixture_is_second_member() {
        assert_eq!(parse("Ah").main_symbol().as_char(), 'A');
        assert_eq!(parse("Ah-Bv").main_symbol().as_char(), 'B');
        assert_eq!(parse("Sd-Bt").main_symbol().as_char(), 'B');
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(parse("Bv").render(), "Bv");
        assert_eq!(parse("Al+Bt").render(), "Al-Bt");
    }

    #[test]
    fn rejects_malformed_labels() {
        let check = |s: &str, reason: MalformedReason| {
            match parse_label(s, &alphabet()) {
                Err(GrammarError::MalformedLabel { reason: r, .. }) => assert_eq!(r, reason, "{s}"),
                other => panic!("{s}: expected malformed, got {other:?}"),
            };
        };
        check("", MalformedReason::Empty);
        check("ah", MalformedReason::NoMainSymbol);
        check("AhB", MalformedReason::MultipleMainSymbols);
        check("A-B-C", MalformedReason::ChainedMixture);
        check("-Bv", MalformedReason::EmptyMember);
        check("Ah-", MalformedReason::EmptyMember);
        check("A1", MalformedReason::IllegalCharacter('1'));
        check("A v", MalformedReason::IllegalCharacter(' '));
    }

    // Raw field labels may mix two members under one main symbol; those parse
    // and render, they are just not valid taxonomy leaves.
    #[test]
    fn same_main_mixtures_parse() {
        let label = parse("rGo-Gro");
        assert!(label.is_mixture());
        assert_eq!(label.main_symbol().as_char(), 'G');
        assert_eq!(label.render(), "rGo-Gro");
    }

    #[test]
    fn rejects_unknown_main_symbol() {
        match parse_label("Qv", &alphabet()) {
            Err(GrammarError::UnknownMainSymbol { symbol, .. }) => assert_eq!(symbol, 'Q'),
            other => panic!("expected unknown main symbol, got {other:?}"),
        }
    }

    #[test]
    fn alphabet_rejects_non_uppercase() {
        assert!(Alphabet::new(['a']).is_err());
        assert!(Alphabet::new([]).is_err());
        assert!(Alphabet::universal().contains(MainSymbol::new('Q').unwrap()));
    }

    #[test]
    fn modifier_rules_reject_forbidden_combinations() {
        let rules = ModifierRules::new(alloc::vec![
            ModifierRule {
                main: MainSymbol::new('B').unwrap(),
                kind: ModifierKind::Prefix,
                letter: 'a',
            },
            ModifierRule {
                main: MainSymbol::new('A').unwrap(),
                kind: ModifierKind::Suffix,
                letter: 'q',
            },
        ]);
        assert!(rules.check(&parse("aB")).is_err());
        assert!(rules.check(&parse("Ah")).is_ok());
        assert!(rules.check(&parse("Aq")).is_err());
        assert!(rules.check(&parse("Ah-aBv")).is_err());
        assert!(rules.check(&parse("Bv")).is_ok());
        assert!(ModifierRules::default().check(&parse("aB")).is_ok());
    }

    // Round-trip: parse(render(x)) == x for randomly built labels.
    #[test]
    fn render_parse_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mains = ['A', 'B', 'C', 'G', 'S'];
        let modifiers = ['a', 'h', 'l', 'v', 'w', 'i', 'e'];
        let random_member = |rng: &mut rand_chacha::ChaCha8Rng, exclude: Option<char>| {
            let main = loop {
                let c = mains[rng.random_range(0..mains.len())];
                if Some(c) != exclude {
                    break c;
                }
            };
            let mut prefix = String::new();
            for _ in 0..rng.random_range(0..3) {
                prefix.push(modifiers[rng.random_range(0..modifiers.len())]);
            }
            let mut suffix = String::new();
            for _ in 0..rng.random_range(0..3) {
                suffix.push(modifiers[rng.random_range(0..modifiers.len())]);
            }
            SimpleLabel::new(&prefix, MainSymbol::new(main).unwrap(), &suffix).unwrap()
        };
        for _ in 0..2000 {
            let label = if rng.random_range(0..2) == 0 {
                HorizonLabel::Simple(random_member(&mut rng, None))
            } else {
                let first = random_member(&mut rng, None);
                let second = random_member(&mut rng, Some(first.main().as_char()));
                HorizonLabel::Mixture(first, second)
            };
            let rendered = label.render();
            assert_eq!(parse(&rendered), label, "round trip of {rendered}");
        }
    }
}
