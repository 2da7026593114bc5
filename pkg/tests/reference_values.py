"""Published IEEE14 reference numbers used as golden fixtures.

Connections are listed in the published order and orientation; pass
``IEEE14_CONNECTIONS`` to ``build_maps``/``reduce_network`` to line up rows.
"""

import numpy as np

IEEE14_CONNECTIONS = [(1, 4), (1, 3), (4, 3), (1, 2), (3, 2)]

# bus -> (injection MW, zone)
IEEE14_BUSES = {
    1: (41, 1), 2: (46, 1), 3: (37, 4), 4: (-57, 3), 5: (34, 1), 6: (13, 2), 7: (-94, 3),
    8: (-20, 3), 9: (-22, 3), 10: (61, 2), 11: (-27, 2), 12: (-21, 2), 13: (13, 2), 14: (-4, 2),
}

# rows: connections above; columns: zones 2, 3, 4
H_DEP = np.array([
    [-0.138, -0.144, -0.532],
    [-0.582, -0.695, -0.450],
    [-0.138, -0.144, 0.468],
    [-0.278, -0.159, -0.017],
    [-0.721, 0.159, 0.017],
])
H_IND = np.array([
    [-0.126, -0.143, -0.532],
    [-0.343, -0.676, -0.450],
    [-0.126, -0.143, 0.468],
    [-0.530, -0.179, -0.017],
    [-0.469, 0.179, 0.017],
])

B_PHYS = np.array([5.05, 29.41, 5.84, 3.96, 15.53])
B_SHI = np.array([3.53, 9.26, 2.96, 4.00, 2.81])
B_OH = np.array([0.19, 0.71, 0.25, 0.37, 0.48])
B_OPT = np.array([12.47, 29.41, 16.97, 11.04, 12.98])

# fixed-injection NRMSE at the base case
NRMSE_FIXED = {"H_dep": 0.038, "B_oh": 0.099, "B_shi": 0.36}

# scenario study means for ieee14
TABLE_MEANS = {"H_ind": 0.30, "H_dep": 0.51, "B_phys": 0.57, "B_oh": 0.33, "B_shi": 0.38, "B_opt": 0.31}
