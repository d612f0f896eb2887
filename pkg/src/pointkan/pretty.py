from io import StringIO

import click


def field_text(column_name, val):
    """Returns a stringified field given a column name and value"""

    if val is None:
        return "-"
    if isinstance(val, bool):
        return "yes" if val else "no"
    if isinstance(val, int) and val >= 10_000 and not column_name.startswith("d_"):
        return f"{val:_}"
    if isinstance(val, float):
        if val == 0 or 1e-3 <= abs(val) < 1e6:
            return f"{val:.4f}"
        return f"{val:.3e}"
    return str(val)


def table(headers: list[str], rows: list[dict]) -> str:
    """
    Right aligned text table with bold headers, one line per row dict.
    """
    cells = [[field_text(h, row.get(h)) for h in headers] for row in rows]
    widths = [
        max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
        for i, h in enumerate(headers)
    ]
    out = StringIO("")
    out.write("  ".join(bold(f"{h:>{w}}") for h, w in zip(headers, widths, strict=True)))
    out.write("\n")
    for r in cells:
        out.write("  ".join(f"{c:>{w}}" for c, w in zip(r, widths, strict=True)))
        out.write("\n")
    return out.getvalue()


def bold_green(txt):
    return click.style(txt, bold=True, fg="green")


def bold_red(txt):
    return click.style(txt, bold=True, fg="red")


def bold(txt):
    return click.style(txt, bold=True)


def pass_fail(passed: bool):
    return bold_green("pass") if passed else bold_red("FAIL")


def s(x):
    """Formatting plurals. Argument can be an `int` or an iterable"""
    n = x if isinstance(x, int) else len(x)
    return "" if n == 1 else "s"
