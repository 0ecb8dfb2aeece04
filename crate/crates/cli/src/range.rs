/// Parses `a..b` (inclusive), `a` or `a,b,c`. A `q` prefix on each number
/// is accepted so that `q1..q10` reads naturally.
pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| {
        let t = t.trim();
        let t = t.strip_prefix(['q', 'Q']).unwrap_or(t);
        t.parse::<usize>().map_err(|_| format!("`{t}` is not a number"))
    };
    let s = s.trim();
    if s.is_empty() {
        return Err("empty range".into());
    }
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        (num(a)?..=num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(format!("range `{s}` is empty"));
    }
    Ok(out)
}
