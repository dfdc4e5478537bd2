use chrono::DateTime;

use super::Event;

/// Why a log line produced no event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    Empty,
    /// Malformed record; the string says what was missing.
    Malformed(&'static str),
    BadTimestamp(String),
}

/// Parse one Apache common/combined log line.
///
/// The entity is the client address, the feature is the request path (with the
/// query string removed when `strip_query` is set) and the value is 1.
pub fn parse_access_log(line: &str, strip_query: bool) -> Result<Event, SkipReason> {
    let line = line.trim();
    if line.is_empty() {
        return Err(SkipReason::Empty);
    }
    let host = line.split_whitespace().next().ok_or(SkipReason::Malformed("host"))?;

    let open = line.find('[').ok_or(SkipReason::Malformed("time field"))?;
    let close = line[open..]
        .find(']')
        .map(|c| open + c)
        .ok_or(SkipReason::Malformed("time field"))?;
    let stamp = &line[open + 1..close];
    let timestamp = DateTime::parse_from_str(stamp, "%d/%b/%Y:%H:%M:%S %z")
        .map_err(|_| SkipReason::BadTimestamp(stamp.to_string()))?
        .timestamp();

    let rest = &line[close + 1..];
    let q0 = rest.find('"').ok_or(SkipReason::Malformed("request"))?;
    let q1 = rest[q0 + 1..]
        .find('"')
        .map(|q| q0 + 1 + q)
        .ok_or(SkipReason::Malformed("request"))?;
    let mut request = rest[q0 + 1..q1].split_whitespace();
    let _method = request.next().ok_or(SkipReason::Malformed("request"))?;
    let target = request.next().ok_or(SkipReason::Malformed("request path"))?;

    let path = if strip_query {
        target.split('?').next().unwrap_or(target)
    } else {
        target
    };
    if path.is_empty() {
        return Err(SkipReason::Malformed("request path"));
    }

    Ok(Event {
        timestamp,
        entity: host.to_string(),
        feature: path.to_string(),
        value: 1.0,
    })
}

/// Line-by-line parser that counts what it skipped.
#[derive(Debug, Clone)]
pub struct LogParser {
    pub strip_query: bool,
    pub lines: usize,
    pub empty: usize,
    /// Malformed lines and bad timestamps.
    pub warnings: usize,
}

impl Default for LogParser {
    fn default() -> Self {
        LogParser {
            strip_query: true,
            lines: 0,
            empty: 0,
            warnings: 0,
        }
    }
}

impl LogParser {
    pub fn new(strip_query: bool) -> Self {
        LogParser {
            strip_query,
            ..Default::default()
        }
    }

    pub fn parse_line(&mut self, line: &str) -> Option<Event> {
        self.lines += 1;
        match parse_access_log(line, self.strip_query) {
            Ok(ev) => Some(ev),
            Err(SkipReason::Empty) => {
                self.empty += 1;
                None
            }
            Err(reason) => {
                self.warnings += 1;
                log::warn!("line {}: skipped ({reason:?})", self.lines);
                None
            }
        }
    }

    pub fn parse_reader<R: std::io::BufRead>(&mut self, reader: R) -> std::io::Result<Vec<Event>> {
        let mut out = Vec::new();
        for line in reader.lines() {
            if let Some(ev) = self.parse_line(&line?) {
                out.push(ev);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_fields() {
        let ev = parse_access_log(
            r#"1.2.3.4 - - [10/Oct/2020:13:55:36 +0000] "GET /a.html?x=1 HTTP/1.1" 200 512"#,
            true,
        )
        .unwrap();
        assert_eq!(ev.entity, "1.2.3.4");
        assert_eq!(ev.feature, "/a.html");
        assert_eq!(ev.value, 1.0);
        assert_eq!(ev.timestamp, 1_602_338_136);
    }

    #[test]
    fn keeps_query_when_asked() {
        let ev = parse_access_log(
            r#"1.2.3.4 - - [10/Oct/2020:13:55:36 +0000] "GET /a.html?x=1 HTTP/1.1" 200 512"#,
            false,
        )
        .unwrap();
        assert_eq!(ev.feature, "/a.html?x=1");
    }

    #[test]
    fn offset_is_normalized_to_utc() {
        let a = parse_access_log(r#"h - - [10/Oct/2020:15:55:36 +0200] "GET / HTTP/1.1" 200 1"#, true).unwrap();
        assert_eq!(a.timestamp, 1_602_338_136);
    }

    #[test]
    fn combined_format_with_agent() {
        let ev = parse_access_log(
            r#"10.0.0.9 - frank [10/Oct/2000:13:55:36 -0700] "POST /api/v1/x HTTP/1.0" 200 2326 "http://r/" "Mozilla/4.08 [en] (Win98; I ;Nav)""#,
            true,
        )
        .unwrap();
        assert_eq!(ev.feature, "/api/v1/x");
    }

    #[test]
    fn empty_and_garbage_lines_are_skipped() {
        let mut p = LogParser::default();
        assert!(p.parse_line("").is_none());
        assert!(p
            .parse_line(r#"1.2.3.4 - - [not a time] "GET / HTTP/1.1" 200 1"#)
            .is_none());
        assert!(p.parse_line("1.2.3.4 - - [10/Oct/2020:13:55:36 +0000]").is_none());
        assert_eq!(p.lines, 3);
        assert_eq!(p.empty, 1);
        assert_eq!(p.warnings, 2);
    }
}
