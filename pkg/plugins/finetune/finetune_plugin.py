"""Fine-tuning as an external plugin process.

Speaks the line-delimited JSON protocol on stdin/stdout and drives the
library's fine-tuning learner one step at a time. Given the same seed it
should reproduce the built-in ``base`` method.
"""

import json
import sys

import numpy as np

from cltree.envsim.environment import Feedback, Observation
from cltree.envsim.spaces import space_from_dict
from cltree.methods.base import BaseMethod, SettingDescription
from cltree.taxonomy import AssumptionVector, MethodDescriptor


def _obs(d):
    return Observation(np.asarray(d["x"], dtype=np.float64), d["task_id"], d["boundary"],
                       d["episode_done"], d.get("truncated", False))


def _setting(d):
    return SettingDescription(
        d["name"], AssumptionVector.from_dict(d["assumptions"]),
        space_from_dict(d["observation_space"]), space_from_dict(d["action_space"]),
        d["num_tasks"], d["classes_per_task"], d["disjoint_actions"], d["family"],
        d["phase_steps"])


def _reply(msg):
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


def main():
    learner = None
    for line in sys.stdin:
        msg = json.loads(line)
        kind = msg["type"]
        try:
            if kind == "configure":
                setting = _setting(msg["setting"])
                desc = MethodDescriptor("finetune_plugin", setting.assumptions,
                                        msg["hyperparameters"])
                learner = BaseMethod(desc, setting, msg["seed"])
                _reply({"type": "ready"})
            elif kind == "begin_phase":
                learner.begin_phase()
            elif kind == "act":
                obs = _obs(msg["observation"])
                a = learner.train_action(obs) if msg["training"] else learner.get_actions(obs)
                _reply({"type": "action", "action": np.asarray(a).tolist()})
            elif kind == "feedback":
                label = msg["label"]
                fb = Feedback(msg["reward"], None if label is None else np.asarray(label))
                learner.learn(_obs(msg["observation"]), msg["action"], fb,
                              _obs(msg["next_observation"]))
            elif kind == "task_switch":
                learner.on_task_switch(msg["task_id"])
            elif kind == "close":
                return
        except Exception as err:  # report and keep the pipe alive
            if kind in ("configure", "act"):
                _reply({"type": "error", "message": f"{type(err).__name__}: {err}"})
            else:
                print(f"finetune_plugin: {kind}: {err}", file=sys.stderr)
                return


if __name__ == "__main__":
    main()
