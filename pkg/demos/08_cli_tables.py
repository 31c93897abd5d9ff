"""
Tables from the command line
============================

The ``erm-asymptotics`` entry point writes the same quantities as CSV or JSON.
Here it is driven in-process; from a shell the arguments are identical.
"""

from erm_asymptotics.cli import main

# %%
main(["lambda-opt", "--loss", "square", "--alpha", "1,5,20"])

# %%
main(["solve", "--loss", "hinge", "--alpha", "0.5:2:4", "--lambda", "0.1", "--format", "json"])
