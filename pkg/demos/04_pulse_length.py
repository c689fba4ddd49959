"""Why the pulse must be longer than tau_c: excited-state population in the full model.

The effective model eliminates the emitter's excited states, which is
valid only when they stay nearly empty. The full four-level model tracks
them directly; their time-averaged population falls as the pulse gets
longer, roughly as the closed-form estimate predicts once kappa tau >> 1.

    python3 demos/04_pulse_length.py   (a few minutes)
"""

from catpulse import SystemParams, make_pulse_plan
from catpulse.analytics import pe_estimate, tau_c
from catpulse.dynamics import integrate_master
from catpulse.model import build_full_model, excited_projector
from catpulse.protocol import initial_state
from catpulse.states import EXCITED_OBSERVABLE, excited_population_avg

ALPHA = 2.0


def main():
    # rates in units of g; kappa = g with no internal loss
    p = SystemParams(g=1.0, delta=1000.0, gamma=0.5, kappa_ex=1.0)
    print(f"tau_c = {tau_c(p):.3g}/g")
    print(f"{'kappa*tau':>9} {'P_e':>10} {'estimate':>10} {'steps':>6}")
    for kt in (3.0, 10.0, 30.0):
        plan = make_pulse_plan(p, [ALPHA], kappa_tau=kt)
        model = build_full_model(p, plan.drives)
        traj = integrate_master(model, initial_state(model), (0.0, plan.envelope.T),
                                observables={EXCITED_OBSERVABLE: excited_projector(model)})
        tau = plan.envelope.tau
        print(f"{kt:>9g} {excited_population_avg(traj, p, tau):>10.4g} {pe_estimate(ALPHA, p, tau):>10.4g} "
              f"{traj.diagnostics['steps']:>6}")


if __name__ == "__main__":
    main()
