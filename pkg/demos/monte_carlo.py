# # Monte Carlo check of the optimal policy
#
# Simulate the threshold policy with the survival-weighted estimator and compare
# it with the closed-form value and with two simple alternatives.

# In[1]:

from optliq import ModelParams, State, ValueContext, value
from optliq.simulation import Policy, SimConfig, estimate

ctx = ValueContext.from_params(ModelParams.reference())
s = State(1.5, 1.5, 1.0)
print("closed form:", value(s, ctx))


# In[2]:

for pol in (Policy.optimal(), Policy.immediate(), Policy.sell_at(1.0)):
    est = estimate(s, ctx, SimConfig(n_paths=20_000, dt=2e-3, seed=3, policy=pol))
    print(f"{pol.tag:<14s} {est.mean:.5f} +- {est.std_error:.5f}  defaults={est.default_fraction:.3f}")
