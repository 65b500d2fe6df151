//! `--channels` list syntax: comma-separated indices and inclusive ranges.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelList(pub Vec<usize>);

pub fn parse_list(spec: &str) -> Result<ChannelList, String> {
    parse(spec).map(ChannelList)
}

pub fn parse(spec: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim) {
        if part.is_empty() {
            return Err(format!("empty item in `{spec}`"));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| format!("`{s}` is not a channel number"))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("range `{part}` is reversed"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
