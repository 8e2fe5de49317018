use super::{BvhError, BvhErrorKind, Channel, ChannelSpec, MotionClip};
use crate::geometry::{normalize_name, Joint, Skeleton, Vec3};

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
}

fn err(line: usize, kind: BvhErrorKind) -> BvhError {
    BvhError { line, kind }
}

/// Splits a line on whitespace and isolates braces as their own tokens.
fn lex_line<'a>(line: &'a str, number: usize, out: &mut Vec<Token<'a>>) {
    for word in line.split_whitespace() {
        let mut start = 0;
        for (i, c) in word.char_indices() {
            if c == '{' || c == '}' {
                if start < i {
                    out.push(Token { text: &word[start..i], line: number });
                }
                out.push(Token { text: &word[i..i + 1], line: number });
                start = i + 1;
            }
        }
        if start < word.len() {
            out.push(Token { text: &word[start..], line: number });
        }
    }
}

struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, expected: &'static str) -> Result<Token<'a>, BvhError> {
        let tok = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| err(self.last_line, BvhErrorKind::UnexpectedEof { expected }))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn expect(&mut self, keyword: &'static str) -> Result<Token<'a>, BvhError> {
        let tok = self.next(keyword)?;
        if tok.text.eq_ignore_ascii_case(keyword) {
            Ok(tok)
        } else {
            Err(err(
                tok.line,
                BvhErrorKind::UnexpectedToken {
                    expected: keyword,
                    found: tok.text.to_string(),
                },
            ))
        }
    }

    /// Joint name: every token on the keyword's line up to an opening brace.
    fn name(&mut self, line: usize) -> Result<String, BvhError> {
        let mut parts = Vec::new();
        while let Some(tok) = self.peek() {
            if tok.line != line || tok.text == "{" {
                break;
            }
            parts.push(tok.text);
            self.pos += 1;
        }
        if parts.is_empty() {
            let found = self.peek().map_or_else(String::new, |t| t.text.to_string());
            return Err(err(line, BvhErrorKind::UnexpectedToken { expected: "joint name", found }));
        }
        Ok(parts.join(" "))
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let tok = self.next("number")?;
        parse_number(tok.text).ok_or_else(|| err(tok.line, BvhErrorKind::InvalidNumber(tok.text.to_string())))
    }
}

fn parse_number(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

enum Block {
    Joint(usize),
    EndSite(usize),
}

struct PendingJoint {
    name: String,
    parent: Option<usize>,
    offset: Vec3,
    end_site: Option<Vec3>,
    channels: Vec<Channel>,
    line: usize,
}

/// Parses a BVH document. Keywords are case-insensitive; LF and CRLF line endings are accepted.
pub fn parse_bvh(text: &str) -> Result<MotionClip, BvhError> {
    let lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let last_line = lines.len().max(1);

    // Hierarchy tokens run up to the MOTION keyword.
    let mut tokens = Vec::new();
    let mut motion_line = None;
    for (idx, line) in lines.iter().enumerate() {
        let number = idx + 1;
        let before = tokens.len();
        lex_line(line, number, &mut tokens);
        if let Some(k) = tokens[before..].iter().position(|t| t.text.eq_ignore_ascii_case("MOTION")) {
            let at = before + k;
            if let Some(extra) = tokens.get(at + 1) {
                return Err(err(
                    number,
                    BvhErrorKind::UnexpectedToken {
                        expected: "end of line",
                        found: extra.text.to_string(),
                    },
                ));
            }
            tokens.truncate(at);
            motion_line = Some(idx);
            break;
        }
    }

    let mut cursor = Cursor {
        tokens,
        pos: 0,
        last_line,
    };
    let first = cursor
        .peek()
        .ok_or_else(|| err(1, BvhErrorKind::MissingKeyword("HIERARCHY")))?;
    if !first.text.eq_ignore_ascii_case("HIERARCHY") {
        return Err(err(first.line, BvhErrorKind::MissingKeyword("HIERARCHY")));
    }
    cursor.pos += 1;
    let motion_line = motion_line.ok_or_else(|| err(last_line, BvhErrorKind::MissingKeyword("MOTION")))?;
    cursor.last_line = motion_line + 1;

    let joints = parse_hierarchy(&mut cursor)?;
    let (skeleton, channels) = build_skeleton(joints)?;
    let total = channels.total();
    if total == 0 {
        return Err(err(motion_line + 1, BvhErrorKind::NoChannels));
    }

    let (frame_time, frames) = parse_motion(&lines, motion_line + 1, total)?;
    MotionClip::new(skeleton, channels, frame_time, frames)
        .map_err(|e| err(motion_line + 1, BvhErrorKind::Skeleton(e.to_string())))
}

fn parse_hierarchy(cursor: &mut Cursor<'_>) -> Result<Vec<PendingJoint>, BvhError> {
    let root = cursor.expect("ROOT")?;
    let name = cursor.name(root.line)?;
    cursor.expect("{")?;
    let mut joints = vec![PendingJoint {
        name,
        parent: None,
        offset: Vec3::zeros(),
        end_site: None,
        channels: Vec::new(),
        line: root.line,
    }];
    let mut stack = vec![Block::Joint(0)];

    while let Some(top) = stack.last() {
        let tok = cursor
            .peek()
            .ok_or_else(|| err(cursor.last_line, BvhErrorKind::UnbalancedBraces))?;
        cursor.pos += 1;
        let keyword = tok.text.to_ascii_lowercase();
        match (keyword.as_str(), top) {
            ("}", _) => {
                stack.pop();
            }
            ("offset", &Block::Joint(j)) => {
                joints[j].offset = Vec3::new(cursor.number()?, cursor.number()?, cursor.number()?);
            }
            ("offset", &Block::EndSite(j)) => {
                joints[j].end_site = Some(Vec3::new(cursor.number()?, cursor.number()?, cursor.number()?));
            }
            ("channels", &Block::Joint(j)) => {
                let count_tok = cursor.next("channel count")?;
                let declared: usize = count_tok
                    .text
                    .parse()
                    .map_err(|_| err(count_tok.line, BvhErrorKind::InvalidNumber(count_tok.text.to_string())))?;
                let mut list = Vec::new();
                while list.len() < declared {
                    let Some(tok) = cursor.peek() else {
                        return Err(err(
                            count_tok.line,
                            BvhErrorKind::ChannelCount { declared, found: list.len() },
                        ));
                    };
                    let Ok(channel) = tok.text.parse::<Channel>() else {
                        if list.len() < declared && tok.line == count_tok.line {
                            return Err(err(tok.line, BvhErrorKind::InvalidChannel(tok.text.to_string())));
                        }
                        return Err(err(
                            count_tok.line,
                            BvhErrorKind::ChannelCount { declared, found: list.len() },
                        ));
                    };
                    if list.contains(&channel) {
                        return Err(err(tok.line, BvhErrorKind::DuplicateChannel(channel.to_string())));
                    }
                    list.push(channel);
                    cursor.pos += 1;
                }
                if let Some(extra) = cursor.peek().filter(|t| t.line == count_tok.line) {
                    if extra.text.parse::<Channel>().is_ok() {
                        return Err(err(
                            extra.line,
                            BvhErrorKind::ChannelCount { declared, found: declared + 1 },
                        ));
                    }
                }
                joints[j].channels = list;
            }
            ("joint", &Block::Joint(parent)) => {
                let name = cursor.name(tok.line)?;
                cursor.expect("{")?;
                joints.push(PendingJoint {
                    name,
                    parent: Some(parent),
                    offset: Vec3::zeros(),
                    end_site: None,
                    channels: Vec::new(),
                    line: tok.line,
                });
                stack.push(Block::Joint(joints.len() - 1));
            }
            ("end", &Block::Joint(j)) => {
                cursor.expect("Site")?;
                cursor.expect("{")?;
                if joints[j].end_site.is_some() {
                    return Err(err(tok.line, BvhErrorKind::Skeleton(format!(
                        "joint {:?} has more than one End Site",
                        joints[j].name
                    ))));
                }
                joints[j].end_site = Some(Vec3::zeros());
                stack.push(Block::EndSite(j));
            }
            _ => {
                return Err(err(
                    tok.line,
                    BvhErrorKind::UnexpectedToken {
                        expected: match top {
                            Block::Joint(_) => "OFFSET, CHANNELS, JOINT, End Site or }",
                            Block::EndSite(_) => "OFFSET or }",
                        },
                        found: tok.text.to_string(),
                    },
                ));
            }
        }
    }

    if let Some(tok) = cursor.peek() {
        let kind = if tok.text == "}" {
            BvhErrorKind::UnbalancedBraces
        } else {
            BvhErrorKind::UnexpectedToken {
                expected: "MOTION",
                found: tok.text.to_string(),
            }
        };
        return Err(err(tok.line, kind));
    }
    Ok(joints)
}

fn build_skeleton(pending: Vec<PendingJoint>) -> Result<(Skeleton, ChannelSpec), BvhError> {
    let mut seen = std::collections::HashSet::new();
    for j in &pending {
        if !seen.insert(normalize_name(&j.name)) {
            return Err(err(j.line, BvhErrorKind::Skeleton(format!("duplicate joint name {:?}", j.name))));
        }
    }
    let first_line = pending.first().map_or(1, |j| j.line);
    let mut joints = Vec::with_capacity(pending.len());
    let mut channels = Vec::with_capacity(pending.len());
    for j in pending {
        joints.push(Joint {
            name: j.name,
            parent: j.parent,
            rest_offset: j.offset,
            end_site: j.end_site,
        });
        channels.push(j.channels);
    }
    let skeleton = Skeleton::new(joints).map_err(|e| err(first_line, BvhErrorKind::Skeleton(e.to_string())))?;
    let channels = ChannelSpec::new(channels).map_err(|e| err(first_line, BvhErrorKind::Skeleton(e.to_string())))?;
    Ok((skeleton, channels))
}

/// Value after the first ':' of a header line, if the line starts with `keyword`.
fn header_value<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let trimmed = line.trim_start();
    let head = trimmed.get(..keyword.len())?;
    if !head.eq_ignore_ascii_case(keyword) {
        return None;
    }
    let rest = trimmed[keyword.len()..].trim_start();
    rest.strip_prefix(':').map(str::trim)
}

fn parse_motion(lines: &[&str], start: usize, total: usize) -> Result<(f64, Vec<Vec<f64>>), BvhError> {
    let last_line = lines.len().max(1);
    let mut rows = lines
        .iter()
        .enumerate()
        .skip(start)
        .map(|(i, l)| (i + 1, *l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (line, text) = rows
        .next()
        .ok_or_else(|| err(last_line, BvhErrorKind::MissingKeyword("Frames")))?;
    let value = header_value(text, "Frames").ok_or_else(|| err(line, BvhErrorKind::MissingKeyword("Frames")))?;
    let declared: usize = value
        .parse()
        .map_err(|_| err(line, BvhErrorKind::InvalidNumber(value.to_string())))?;

    let (line, text) = rows
        .next()
        .ok_or_else(|| err(last_line, BvhErrorKind::MissingKeyword("Frame Time")))?;
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let value = header_value(&collapsed, "Frame Time")
        .ok_or_else(|| err(line, BvhErrorKind::MissingKeyword("Frame Time")))?;
    let frame_time = parse_number(value).ok_or_else(|| err(line, BvhErrorKind::InvalidNumber(value.to_string())))?;
    if frame_time <= 0.0 {
        return Err(err(line, BvhErrorKind::InvalidFrameTime(value.to_string())));
    }

    let mut frames = Vec::with_capacity(declared.min(1 << 16));
    for (line, text) in rows.by_ref() {
        if frames.len() == declared {
            let extra = 1 + lines[line..].iter().filter(|l| !l.trim().is_empty()).count();
            return Err(err(
                line,
                BvhErrorKind::FrameCountMismatch {
                    declared,
                    found: declared + extra,
                },
            ));
        }
        let mut row = Vec::with_capacity(total);
        for word in text.split_whitespace() {
            row.push(parse_number(word).ok_or_else(|| err(line, BvhErrorKind::InvalidNumber(word.to_string())))?);
        }
        if row.len() != total {
            return Err(err(
                line,
                BvhErrorKind::ValueCount {
                    expected: total,
                    found: row.len(),
                },
            ));
        }
        frames.push(row);
    }
    if frames.len() != declared {
        return Err(err(
            last_line,
            BvhErrorKind::FrameCountMismatch {
                declared,
                found: frames.len(),
            },
        ));
    }
    Ok((frame_time, frames))
}
