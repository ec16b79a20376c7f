"""Writes units_cases.json: hand-derived top-level unit decompositions.

Each expectation below was written by hand; `check()` re-derives it with
CPython's ast module so a typo in a case fails loudly.
Run from this directory: python3 make_units_cases.py
"""
import ast
import json

TWO_SUM = """class Solution:
   def twoSum(self, nums: List[int], target:
       int) -> List[int]:
       seen = {}
       for i, value in enumerate(nums): #1
           remaining = target - nums[i] #2

           if remaining in seen: #3
               return [i, seen[remaining]]  #4
           else:
               seen[value] = i  #5
"""

CASES = [
    ("two_sum_class", TWO_SUM, [
        ("ClassUnit", "Solution", TWO_SUM.rstrip("\n"), [[1, 11]]),
    ]),
    ("statements_only", "import os\nx = os.getcwd()", [
        ("Residue", "<residue>", "import os\nx = os.getcwd()", [[1, 2]]),
    ]),
    ("def_class_then_residue", "import m\n\ndef f():\n    pass\n\nclass C:\n    pass\n\nprint(1)", [
        ("FunctionUnit", "f", "def f():\n    pass", [[3, 4]]),
        ("ClassUnit", "C", "class C:\n    pass", [[6, 7]]),
        ("Residue", "<residue>", "import m\nprint(1)", [[1, 1], [9, 9]]),
    ]),
    ("decorated_function", "import functools\n\n@functools.lru_cache(maxsize=None)\ndef fib(n):\n    return n if n < 2 else fib(n - 1) + fib(n - 2)\n", [
        ("FunctionUnit", "fib", "@functools.lru_cache(maxsize=None)\ndef fib(n):\n    return n if n < 2 else fib(n - 1) + fib(n - 2)", [[3, 5]]),
        ("Residue", "<residue>", "import functools", [[1, 1]]),
    ]),
    ("async_def", "import asyncio\n\nasync def fetch(session, url):\n    async with session.get(url) as r:\n        return await r.text()\n\nloop = asyncio.new_event_loop()", [
        ("FunctionUnit", "fetch", "async def fetch(session, url):\n    async with session.get(url) as r:\n        return await r.text()", [[3, 5]]),
        ("Residue", "<residue>", "import asyncio\nloop = asyncio.new_event_loop()", [[1, 1], [7, 7]]),
    ]),
    ("nested_def_stays_inside", "def outer(xs):\n    def inner(x):\n        return x * 2\n    return [inner(x) for x in xs]", [
        ("FunctionUnit", "outer", "def outer(xs):\n    def inner(x):\n        return x * 2\n    return [inner(x) for x in xs]", [[1, 4]]),
    ]),
    ("decorated_class_and_main_guard", "from dataclasses import dataclass\n\n@dataclass\nclass Point:\n    x: float\n    y: float\n\n    def norm(self):\n        return (self.x ** 2 + self.y ** 2) ** 0.5\n\nif __name__ == '__main__':\n    print(Point(3, 4).norm())", [
        ("ClassUnit", "Point", "@dataclass\nclass Point:\n    x: float\n    y: float\n\n    def norm(self):\n        return (self.x ** 2 + self.y ** 2) ** 0.5", [[3, 9]]),
        ("Residue", "<residue>", "from dataclasses import dataclass\nif __name__ == '__main__':\n    print(Point(3, 4).norm())", [[1, 1], [11, 12]]),
    ]),
    ("semicolons_and_adjacent_lines", "a = 1; b = 2\nc = a + b\ndef g(): return c", [
        ("FunctionUnit", "g", "def g(): return c", [[3, 3]]),
        ("Residue", "<residue>", "a = 1; b = 2\nc = a + b", [[1, 2]]),
    ]),
    ("comments_dropped_multiline_call", "# load the data\ndf = load(\n    'path.csv',\n    sep=';',\n)\n# helper below\ndef load(p, sep):\n    return p\n", [
        ("FunctionUnit", "load", "def load(p, sep):\n    return p", [[7, 8]]),
        ("Residue", "<residue>", "df = load(\n    'path.csv',\n    sep=';',\n)", [[2, 5]]),
    ]),
    ("two_functions_and_try_block", "def a():\n    return 1\n\ndef b():\n    return 2\n\ntry:\n    import torch\nexcept ImportError:\n    torch = None", [
        ("FunctionUnit", "a", "def a():\n    return 1", [[1, 2]]),
        ("FunctionUnit", "b", "def b():\n    return 2", [[4, 5]]),
        ("Residue", "<residue>", "try:\n    import torch\nexcept ImportError:\n    torch = None", [[7, 10]]),
    ]),
]


def derive(code):
    lines = code.split("\n")
    tree = ast.parse(code)
    units, residue = [], []
    for node in tree.body:
        start = min([node.lineno] + [d.lineno for d in getattr(node, "decorator_list", [])])
        span = [start, node.end_lineno]
        if isinstance(node, ast.ClassDef):
            units.append(("ClassUnit", node.name, span))
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            units.append(("FunctionUnit", node.name, span))
        elif residue and span[0] <= residue[-1][1] + 1:
            residue[-1][1] = max(residue[-1][1], span[1])
        else:
            residue.append(span)
    text = lambda s: "\n".join(lines[s[0] - 1 : s[1]])
    out = [(k, n, text(s), [s]) for k, n, s in units]
    if residue:
        out.append(("Residue", "<residue>", "\n".join(text(s) for s in residue), residue))
    return out


def check():
    for name, code, expected in CASES:
        got = derive(code)
        assert got == expected, f"{name}:\n got {got}\n want {expected}"


def main():
    check()
    cases = [
        {
            "name": name,
            "code": code,
            "units": [{"kind": k, "name": n, "source": s, "spans": spans} for k, n, s, spans in units],
        }
        for name, code, units in CASES
    ]
    with open("units_cases.json", "w") as f:
        json.dump(cases, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
