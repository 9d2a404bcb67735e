"""Learning general policies for classical planning domains.

The package turns a PDDL domain plus a handful of small training instances
into a policy that generalizes to unseen instances of the same domain:
states are expanded and labeled with goal distances, a pool of description
logic features is generated, a weighted CNF theory is built over the labeled
transitions, an exact MaxSAT optimum selects a cheapest feature set together
with a good-transition labeling, and the resulting rule policy is verified
exhaustively and executed greedily.
"""

from genpol.errors import GenpolError

__version__ = "0.1.0"

__all__ = ["GenpolError", "__version__"]
