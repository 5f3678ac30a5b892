# # Free boundaries and the value function
#
# Compute the two waiting thresholds for the reference parameters, then
# evaluate the value and the optimal block sale at a few states.

# In[1]:

import numpy as np

from optliq import ModelParams, State, ValueContext, classify, optimal_sale, value

params = ModelParams.reference()
ctx = ValueContext.from_params(params)
b = ctx.bounds
print(f"n0={b.n0:.6f}  n1={b.n1:.6f}  F0={b.F0:.6f}  kappa={b.kappa:.6f}")


# Above the barrier the threshold is flat. Below it the threshold falls with inventory.

# In[2]:

for y in (0.0, 0.5, 1.0, 3.0, 7.0):
    print(f"y={y:4.1f}  G(y)={float(b.g_lambda(y)):.6f}  G_inf(y)={float(b.g_infinity(y)):.6f}")


# Value, region and optimal sale at states on both sides of the barrier.

# In[3]:

for s in (State(0.5, 2.0, 1.0), State(1.5, 1.0, 1.0), State(10.0, 1.0, 1.0),
          State(0.2, 1.0, -1.0), State(0.5, 1.0, -1.0), State(1.5, 1.0, -1.0)):
    print(f"{s}  v={value(s, ctx):.6f}  {classify(s, ctx).value:<10s}  sell={optimal_sale(s, ctx):.6f}")


# A price path along the lower threshold: selling a block moves the state along
# the curve (x*exp(-gamma*u), y-u) until it meets G.

# In[4]:

s = State(0.5, 3.0, -1.0)
u = optimal_sale(s, ctx)
x_after = s.x * np.exp(-params.gamma * u)
print(f"sell {u:.6f}: lands at x={x_after:.6f}, G(y-u)={float(b.g_lambda(s.y - u)):.6f}")
