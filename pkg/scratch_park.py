import numpy as np

from roundsim import sim
from roundsim.dynamics import decode_action
from roundsim.world import MODE_EXIT, MODE_CIRCULATE

cfg = sim.case1_config()
search = sim._SearchPolicy(cfg, cfg.risk)

# states lifted from the parked tail of the traced episode (t ~ 36 s)
rows = np.array([
    [30.1, 3.14, 0.0, 1.57, 1.0],    # av0 parked on exit leg 2
    [29.2, 4.71, 0.0, 1.57, 1.0],    # av1 parked on exit leg 3
    [31.7, 0.0, 0.0, 1.57, 1.0],     # av2 parked on exit leg 0
    [29.0, 1.57, 0.0, 1.57, 1.0],    # av3 parked on exit leg 1
])
modes = np.array([MODE_EXIT] * 4, dtype=np.int64)
specs = cfg.vehicles
res = search.planner.plan(
    rows, modes, list(specs), np.zeros((0, 5)), np.zeros(0, dtype=np.int64),
    [], np.zeros((4, 2)), seed=1, uncertainty_seed=1, return_tree=True)
root = res.root
print("fallback", res.fallback, "safe", res.n_safe_children, "/",
      res.n_children, "chosen", res.actions,
      [decode_action(a, search.planner.av_params) for a in res.actions])
for node in sorted(root.children, key=lambda c: -c.visits)[:10]:
    dec = [decode_action(a, search.planner.av_params)[0] for a in node.action]
    print(f"a={node.action} acc={dec} visits={node.visits:3d} "
          f"mean={node.value / max(node.visits, 1):9.4f} safe={node.safe} "
          f"imm={node.reward:8.4f}")

# single vehicle, same spot: is driving out preferred in isolation?
res1 = search.planner.plan(
    rows[2:3], modes[2:3], [specs[2]], np.zeros((0, 5)),
    np.zeros(0, dtype=np.int64), [], np.zeros((1, 2)), seed=1,
    uncertainty_seed=1, return_tree=True)
print("\nsingle:", res1.actions,
      [decode_action(a, search.planner.av_params) for a in res1.actions])
for node in sorted(res1.root.children, key=lambda c: -c.visits)[:8]:
    dec = decode_action(node.action[0], search.planner.av_params)[0]
    print(f"a={node.action} acc={dec:5.2f} visits={node.visits:3d} "
          f"mean={node.value / max(node.visits, 1):9.4f} safe={node.safe} "
          f"imm={node.reward:8.4f}")
