use std::io::IsTerminal;

/// Colour only on a terminal and only when `NO_COLOR` is unset or empty.
fn enabled(terminal: bool) -> bool {
    terminal && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty())
}

fn paint(code: &str, text: &str, terminal: bool) -> String {
    if enabled(terminal) {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

pub fn error_label() -> String {
    paint("1;31", "error:", std::io::stderr().is_terminal())
}

pub fn header(text: &str) -> String {
    paint("1", text, std::io::stdout().is_terminal())
}

pub fn warn(text: &str) -> String {
    paint("33", text, std::io::stderr().is_terminal())
}
