"""Check a plays file against the authoring constraints.

    python scripts/check_plays.py [plays.json]

Reports each play's centroid path and every (from, to) state pair shared by
two robots.  With distinct pairs, three isolated plays give 36 distinct
transitions and each single-play table replays its play with probability 1.
"""

import sys
from collections import defaultdict

from formcast.evaluator import discretize_play
from formcast.grid import GridSpec, encode_state
from formcast.simulator import load_plays


def check(path=None):
    spec = GridSpec()
    plays = load_plays(path, spec)
    owners = defaultdict(list)
    ok = True
    for play in plays:
        fs = discretize_play(spec, play)
        path_ = [tuple(f.centroid) for f in fs]
        print(f"play {play.id} ({play.name}): centroids {path_}")
        if path_[0] == path_[1] or path_[1] == path_[2]:
            print("  consecutive formations share a centroid")
            ok = False
        for k in range(len(fs) - 1):
            for rid in fs[k].states:
                pair = (encode_state(spec, fs[k].states[rid]), encode_state(spec, fs[k + 1].states[rid]))
                owners[pair].append((play.id, k + 1, rid))
    clashes = {p: o for p, o in owners.items() if len(o) > 1}
    for pair, who in clashes.items():
        print(f"  transition {pair} shared by (play, formation, robot) {who}")
    print(f"{len(owners)} distinct transitions")
    return ok and not clashes


if __name__ == "__main__":
    sys.exit(0 if check(sys.argv[1] if len(sys.argv) > 1 else None) else 1)
