//! Closed answer vocabulary: action, magnitude and structure tokens plus
//! a fixed 64-word think vocabulary, with the decode grammar that keeps
//! sampled sequences well-formed.

use crate::env::{Action, ForwardCm, TurnDeg};

pub const TOK_FORWARD: usize = 0;
pub const TOK_LEFT: usize = 1;
pub const TOK_RIGHT: usize = 2;
pub const TOK_STOP: usize = 3;
pub const TOK_CM25: usize = 4;
pub const TOK_CM50: usize = 5;
pub const TOK_CM75: usize = 6;
pub const TOK_DEG15: usize = 7;
pub const TOK_DEG30: usize = 8;
pub const TOK_DEG45: usize = 9;
pub const TOK_DEG90: usize = 10;
pub const TOK_THINK_OPEN: usize = 11;
pub const TOK_THINK_CLOSE: usize = 12;
pub const TOK_ACTION_OPEN: usize = 13;
pub const TOK_ACTION_CLOSE: usize = 14;
pub const TOK_EOS: usize = 15;
pub const THINK_BASE: usize = 16;
pub const THINK_WORD_COUNT: usize = 64;
pub const VOCAB_SIZE: usize = THINK_BASE + THINK_WORD_COUNT;
/// Extra embedding row used as the begin-of-sequence input.
pub const BOS_ROW: usize = VOCAB_SIZE;
/// Hard cap on answer length, tokens.
pub const MAX_ANSWER_LEN: usize = 48;

/// The closed think vocabulary. Think-before-action targets may only use
/// these words, so token-level likelihoods need no sub-word tokenizer.
pub const THINK_WORDS: [&str; THINK_WORD_COUNT] = [
    // object categories (mirror the scene generator)
    "bed", "cabinet", "chair", "desk", "fridge", "lamp", "plant", "shelf", "sink", "sofa",
    "table", "tv", // magnitudes
    "25", "50", "75", "15", "30", "45", "90", // units
    "cm", "degrees", // spatial words
    "left", "right", "front", "behind", "near", "far", // verbs
    "move", "turn", "forward", "stop", "reach", "see", "go", "continue", "explore", "face",
    "pass", "head", // task words
    "the", "a", "task", "first", "next", "goal", "target", "is", "to", "i", "now", "will",
    "and", // status words
    "completed", "done", "likely", "area", "room", "empty", "visible", "not", "no",
    "remaining", "toward", "then",
];

pub fn think_word_id(word: &str) -> Option<usize> {
    THINK_WORDS
        .iter()
        .position(|w| *w == word)
        .map(|i| THINK_BASE + i)
}

pub fn token_name(token: usize) -> String {
    match token {
        TOK_FORWARD => "FORWARD".into(),
        TOK_LEFT => "LEFT".into(),
        TOK_RIGHT => "RIGHT".into(),
        TOK_STOP => "STOP".into(),
        TOK_CM25 => "25cm".into(),
        TOK_CM50 => "50cm".into(),
        TOK_CM75 => "75cm".into(),
        TOK_DEG15 => "15deg".into(),
        TOK_DEG30 => "30deg".into(),
        TOK_DEG45 => "45deg".into(),
        TOK_DEG90 => "90deg".into(),
        TOK_THINK_OPEN => "<Think>".into(),
        TOK_THINK_CLOSE => "</Think>".into(),
        TOK_ACTION_OPEN => "<Action>".into(),
        TOK_ACTION_CLOSE => "</Action>".into(),
        TOK_EOS => "<EOS>".into(),
        t if t >= THINK_BASE && t < VOCAB_SIZE => THINK_WORDS[t - THINK_BASE].into(),
        t => format!("<bad:{t}>"),
    }
}

fn magnitude_token(action: Action) -> Option<usize> {
    match action {
        Action::MoveForward(m) => Some(match m {
            ForwardCm::Cm25 => TOK_CM25,
            ForwardCm::Cm50 => TOK_CM50,
            ForwardCm::Cm75 => TOK_CM75,
        }),
        Action::TurnLeft(d) | Action::TurnRight(d) => Some(match d {
            TurnDeg::Deg15 => TOK_DEG15,
            TurnDeg::Deg30 => TOK_DEG30,
            TurnDeg::Deg45 => TOK_DEG45,
            TurnDeg::Deg90 => TOK_DEG90,
        }),
        Action::Stop => None,
    }
}

fn action_head_token(action: Action) -> usize {
    match action {
        Action::MoveForward(_) => TOK_FORWARD,
        Action::TurnLeft(_) => TOK_LEFT,
        Action::TurnRight(_) => TOK_RIGHT,
        Action::Stop => TOK_STOP,
    }
}

/// Direct-mode target tokens: `action [magnitude] <EOS>`.
pub fn direct_tokens(action: Action) -> Vec<usize> {
    let mut out = vec![action_head_token(action)];
    if let Some(m) = magnitude_token(action) {
        out.push(m);
    }
    out.push(TOK_EOS);
    out
}

/// Think-before-action target tokens:
/// `<Think> words </Think> <Action> action [magnitude] </Action> <EOS>`.
pub fn tba_tokens(think_words: &[usize], action: Action) -> Vec<usize> {
    let mut out = vec![TOK_THINK_OPEN];
    out.extend_from_slice(think_words);
    out.push(TOK_THINK_CLOSE);
    out.push(TOK_ACTION_OPEN);
    out.push(action_head_token(action));
    if let Some(m) = magnitude_token(action) {
        out.push(m);
    }
    out.push(TOK_ACTION_CLOSE);
    out.push(TOK_EOS);
    out
}

fn decode_action(head: usize, mag: Option<usize>) -> Option<Action> {
    match (head, mag) {
        (TOK_FORWARD, Some(TOK_CM25)) => Some(Action::MoveForward(ForwardCm::Cm25)),
        (TOK_FORWARD, Some(TOK_CM50)) => Some(Action::MoveForward(ForwardCm::Cm50)),
        (TOK_FORWARD, Some(TOK_CM75)) => Some(Action::MoveForward(ForwardCm::Cm75)),
        (TOK_LEFT, Some(TOK_DEG15)) => Some(Action::TurnLeft(TurnDeg::Deg15)),
        (TOK_LEFT, Some(TOK_DEG30)) => Some(Action::TurnLeft(TurnDeg::Deg30)),
        (TOK_LEFT, Some(TOK_DEG45)) => Some(Action::TurnLeft(TurnDeg::Deg45)),
        (TOK_LEFT, Some(TOK_DEG90)) => Some(Action::TurnLeft(TurnDeg::Deg90)),
        (TOK_RIGHT, Some(TOK_DEG15)) => Some(Action::TurnRight(TurnDeg::Deg15)),
        (TOK_RIGHT, Some(TOK_DEG30)) => Some(Action::TurnRight(TurnDeg::Deg30)),
        (TOK_RIGHT, Some(TOK_DEG45)) => Some(Action::TurnRight(TurnDeg::Deg45)),
        (TOK_RIGHT, Some(TOK_DEG90)) => Some(Action::TurnRight(TurnDeg::Deg90)),
        (TOK_STOP, None) => Some(Action::Stop),
        _ => None,
    }
}

/// Parsed answer: the action plus any think words that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAnswer {
    pub action: Action,
    pub think_words: Vec<usize>,
}

/// Parses a direct- or think-mode token sequence; `None` when malformed.
pub fn parse_answer(tokens: &[usize]) -> Option<ParsedAnswer> {
    let mut toks = tokens;
    if toks.last() == Some(&TOK_EOS) {
        toks = &toks[..toks.len() - 1];
    }
    if toks.first() == Some(&TOK_THINK_OPEN) {
        let close = toks.iter().position(|&t| t == TOK_THINK_CLOSE)?;
        let think_words: Vec<usize> = toks[1..close].to_vec();
        if think_words
            .iter()
            .any(|&t| !(THINK_BASE..VOCAB_SIZE).contains(&t))
        {
            return None;
        }
        let rest = &toks[close + 1..];
        if rest.first() != Some(&TOK_ACTION_OPEN) || rest.last() != Some(&TOK_ACTION_CLOSE) {
            return None;
        }
        let body = &rest[1..rest.len() - 1];
        let action = parse_action_body(body)?;
        Some(ParsedAnswer {
            action,
            think_words,
        })
    } else {
        let action = parse_action_body(toks)?;
        Some(ParsedAnswer {
            action,
            think_words: Vec::new(),
        })
    }
}

fn parse_action_body(body: &[usize]) -> Option<Action> {
    match body {
        [head] => decode_action(*head, None),
        [head, mag] => decode_action(*head, Some(*mag)),
        _ => None,
    }
}

/// Decode-grammar state machine used by the sampler to mask invalid
/// tokens at every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeState {
    /// Direct mode, expecting an action head.
    ActionHead { in_tba: bool },
    /// Expecting a forward magnitude (cm) or turn magnitude (deg).
    Magnitude { forward: bool, in_tba: bool },
    /// Expecting `<Action>`.
    ActionOpen,
    /// Expecting `</Action>`.
    ActionClose,
    /// Expecting `<EOS>`.
    AwaitEos,
    /// Expecting `<Think>`.
    ThinkOpen,
    /// Inside the think span; `emitted` counts tokens so far overall.
    ThinkWords,
    Done,
}

pub fn initial_state(tba: bool) -> DecodeState {
    if tba {
        DecodeState::ThinkOpen
    } else {
        DecodeState::ActionHead { in_tba: false }
    }
}

/// Token mask for the current state. `emitted` is the number of tokens
/// produced so far; the think span is budgeted so every sequence closes
/// within [`MAX_ANSWER_LEN`] tokens.
pub fn allowed_tokens(state: DecodeState, emitted: usize) -> [bool; VOCAB_SIZE] {
    let mut mask = [false; VOCAB_SIZE];
    match state {
        DecodeState::ActionHead { .. } => {
            mask[TOK_FORWARD] = true;
            mask[TOK_LEFT] = true;
            mask[TOK_RIGHT] = true;
            mask[TOK_STOP] = true;
        }
        DecodeState::Magnitude { forward, .. } => {
            if forward {
                mask[TOK_CM25] = true;
                mask[TOK_CM50] = true;
                mask[TOK_CM75] = true;
            } else {
                mask[TOK_DEG15] = true;
                mask[TOK_DEG30] = true;
                mask[TOK_DEG45] = true;
                mask[TOK_DEG90] = true;
            }
        }
        DecodeState::ActionOpen => mask[TOK_ACTION_OPEN] = true,
        DecodeState::ActionClose => mask[TOK_ACTION_CLOSE] = true,
        DecodeState::AwaitEos => mask[TOK_EOS] = true,
        DecodeState::ThinkOpen => mask[TOK_THINK_OPEN] = true,
        DecodeState::ThinkWords => {
            mask[TOK_THINK_CLOSE] = true;
            // Worst case after closing: <Action> head mag </Action> <EOS>.
            if emitted + 6 < MAX_ANSWER_LEN {
                for t in THINK_BASE..VOCAB_SIZE {
                    mask[t] = true;
                }
            }
        }
        DecodeState::Done => {}
    }
    mask
}

pub fn advance(state: DecodeState, token: usize) -> DecodeState {
    match state {
        DecodeState::ActionHead { in_tba } => match token {
            TOK_STOP => {
                if in_tba {
                    DecodeState::ActionClose
                } else {
                    DecodeState::AwaitEos
                }
            }
            TOK_FORWARD => DecodeState::Magnitude {
                forward: true,
                in_tba,
            },
            _ => DecodeState::Magnitude {
                forward: false,
                in_tba,
            },
        },
        DecodeState::Magnitude { in_tba, .. } => {
            if in_tba {
                DecodeState::ActionClose
            } else {
                DecodeState::AwaitEos
            }
        }
        DecodeState::ActionOpen => DecodeState::ActionHead { in_tba: true },
        DecodeState::ActionClose => DecodeState::AwaitEos,
        DecodeState::AwaitEos => DecodeState::Done,
        DecodeState::ThinkOpen => DecodeState::ThinkWords,
        DecodeState::ThinkWords => {
            if token == TOK_THINK_CLOSE {
                DecodeState::ActionOpen
            } else {
                DecodeState::ThinkWords
            }
        }
        DecodeState::Done => DecodeState::Done,
    }
}

/// Renders think tokens back to space-separated words.
pub fn think_tokens_to_text(tokens: &[usize]) -> String {
    tokens
        .iter()
        .filter(|&&t| (THINK_BASE..VOCAB_SIZE).contains(&t))
        .map(|&t| THINK_WORDS[t - THINK_BASE])
        .collect::<Vec<_>>()
        .join(" ")
}
