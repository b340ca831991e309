"""
Bundled example programs, and generators for the delegation benchmarks.

Programs are stored as `.def` files next to this module; `load` parses and
normalizes them.
"""
from __future__ import annotations

from importlib import resources
from typing import List, Optional

from ..parser import load_program
from ..syntax import Dialect, Program

"""
File extension of program sources
"""
SUFFIX = ".def"

_CHAIN = """\
-- Recursive summation of {n}..1, each step delegating to the next.

fun Flow[int] sum(int k, int acc) {{
  bool done;
  int k1;
  int a1;
  Flow[int] r;
  done = k == 0;
  if done {{
    return acc
  }} else {{
    k1 = k - 1;
    a1 = acc + k;
    r = !sum(k1, a1);
    {delegate} r
  }}
}}

{{
  Flow[int] x;
  int r;
  x = !sum({n}, 0);
  r = get* x;
  return r
}}
"""

_ACKERMANN = """\
-- Ackermann's function, delegating every tail call.

fun Flow[int] ack(int m, int n) {{
  bool mz;
  bool nz;
  int m1;
  int n1;
  int v;
  Flow[int] inner;
  Flow[int] r;
  mz = m == 0;
  if mz {{
    n1 = n + 1;
    return n1
  }} else {{
    nz = n == 0;
    if nz {{
      m1 = m - 1;
      r = !ack(m1, 1);
      {delegate} r
    }} else {{
      n1 = n - 1;
      inner = !ack(m, n1);
      v = get* inner;
      m1 = m - 1;
      r = !ack(m1, v);
      {delegate} r
    }}
  }}
}}

{{
  Flow[int] x;
  int r;
  x = !ack({m}, {n});
  r = get* x;
  return r
}}
"""


def names() -> List[str]:
    """Names of the bundled programs, sorted."""
    return sorted(
        entry.name[: -len(SUFFIX)] for entry in resources.files(__name__).iterdir() if entry.name.endswith(SUFFIX)
    )


def source(name: str) -> str:
    """
    Source text of a bundled program.

    Args:
        name (str): program name, without extension.

    Raises:
        ValueError: if no program has that name.

    Returns:
        str: the program text.
    """
    if not name:
        raise ValueError("Program name is required")
    if name not in names():
        raise ValueError(f"No bundled program named {name!r}")
    return resources.files(__name__).joinpath(name + SUFFIX).read_text(encoding="utf-8")


def load(name: str, dialect: Optional[Dialect] = None) -> Program:
    """Parse and normalize a bundled program."""
    return load_program(source(name), dialect)


def delegation_chain(n: int, forward: bool = True) -> str:
    """
    Source of a summation chain of n delegating calls; the program computes n(n+1)/2.

    Args:
        n (int): number of delegations, at least 1.
        forward (bool, optional): delegate with forward* rather than return. By default True.

    Raises:
        ValueError: if n is smaller than 1.
    """
    if n < 1:
        raise ValueError("Chain length must be positive")
    return _CHAIN.format(n=n, delegate="forward*" if forward else "return")


def ackermann(m: int, n: int, forward: bool = True) -> str:
    """Source of a program computing Ackermann's function of m and n by delegation."""
    if m < 0 or n < 0:
        raise ValueError("Ackermann arguments must be non-negative")
    return _ACKERMANN.format(m=m, n=n, delegate="forward*" if forward else "return")
