"""Maps written as text: parsing, evaluation, Jacobians, domain errors."""
# %%
import numpy as np

from waistlab.maplang import MapDomainError, MapSyntaxError, parse_map

# %%
f = parse_map("x1^2 - x2; sin(pi*x1) * exp(-x2^2)", 2, 2)
print(f.pretty())
x = np.array([[0.5, 0.25], [0.1, -1.0]])
print("values\n", f(x))
print("jacobian at (0.5, 0.25)\n", f.jacobian(x[0]))

# %% [markdown]
# The power operator binds right to left and tighter than unary minus.

# %%
print(parse_map("-x1^2^3", 1, 1).pretty())

# %% [markdown]
# Syntax errors point at the offending byte; domain errors name the component.

# %%
for text in ("x1 + * x2", "x3", "cosh(x1)"):
    try:
        parse_map(text, 2, 1)
    except MapSyntaxError as exc:
        print(f"{text!r}: {exc}")

g = parse_map("x1; sqrt(x2)", 2, 2)
try:
    g(np.array([1.0, -1.0]))
except MapDomainError as exc:
    print("strict:", exc)
print("nan mode:", g(np.array([1.0, -1.0]), errors="nan"))
