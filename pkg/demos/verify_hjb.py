# # Certifying the closed form
#
# Residuals of the variational inequality on a price/inventory grid in both
# regimes, followed by the lower-threshold identities. A value function built
# with a 1% error in the coefficient B is flagged.

# In[1]:

from optliq import ModelParams, ValueContext
from optliq.hjb import Grid, verify_boundary_identities, verify_hjb

ctx = ValueContext.from_params(ModelParams.reference())
rep = verify_hjb(ctx, Grid())
for r in rep.per_region:
    print(f"{r.name:<12s} n={r.count:6d}  eq={r.max_eq_residual:.2e}  ineq={r.max_ineq_violation:.2e}  ok={r.passed}")


# In[2]:

ids = verify_boundary_identities(ctx)
for r in ids.per_region:
    print(f"{r.name:<14s} {r.max_eq_residual:.2e}  ok={r.passed}")


# In[3]:

bad = ctx.with_bounds(ctx.bounds.with_b_scale(1.01))
print("corrupted B fails in:", verify_hjb(bad, Grid(nx=100, ny=10)).failing())
