"""Published reference values for the eight-city study.

Values are transcribed verbatim from the source tables. Cities are always in
alphabetical order. ``"**"`` cells (p < 0.01) are stored as 0.005, the midpoint
of the printed interval.
"""
import numpy as np

CITIES = ("ATL", "AUS", "COL", "JAX", "NAS", "OKC", "POR", "SEA")
FACTORS = ("new_homes", "accessible", "central_ac", "green", "waterfront")
FACTOR_LABELS = {
    "new_homes": "New Homes",
    "accessible": "Accessible",
    "central_ac": "Central AC",
    "green": "Green",
    "waterfront": "Waterfront",
}
BELOW_001 = 0.005

# Average price and factor counts for Atlanta, 2000-2022.
# columns: year, av_price, new_homes, accessible, central_ac, green, waterfront
ATL_ROWS = (
    (2000, 174500, 456, 43, 454, 20, 31),
    (2001, 187800, 718, 85, 716, 38, 38),
    (2002, 196400, 919, 112, 873, 46, 79),
    (2003, 203400, 649, 38, 615, 26, 43),
    (2004, 211700, 1267, 139, 1235, 40, 107),
    (2005, 222000, 1842, 140, 1815, 55, 142),
    (2006, 229200, 1775, 171, 1718, 37, 139),
    (2007, 233800, 1451, 124, 1386, 36, 99),
    (2008, 225500, 916, 145, 902, 19, 52),
    (2009, 212000, 427, 41, 401, 30, 74),
    (2010, 195600, 330, 46, 305, 47, 31),
    (2011, 180500, 89, 2, 88, 7, 5),
    (2012, 172900, 105, 1, 114, 6, 14),
    (2013, 183400, 168, 2, 174, 7, 11),
    (2014, 200900, 167, 3, 182, 13, 8),
    (2015, 216600, 283, 5, 277, 16, 14),
    (2016, 232400, 319, 5, 305, 11, 23),
    (2017, 249100, 404, 6, 394, 12, 26),
    (2018, 269600, 451, 2, 432, 25, 28),
    (2019, 286400, 629, 11, 823, 31, 26),
    (2020, 303200, 1225, 31, 968, 32, 75),
    (2021, 351300, 1091, 54, 1019, 55, 88),
    (2022, 430000, 740, 29, 760, 51, 67),
)

# Residual tables exactly as printed. The captions of the two appendix tables
# are interchanged in the source: the table captioned "GLM" has the smaller
# residual sums of squares, which only the (higher R^2) GAM fits can produce.
# ``panel.builtin_residuals`` maps model names to the correct table.
RESIDUAL_YEARS = tuple(range(2001, 2023))
_B1_PRINTED = """\
  2001  0.068 -0.229 -0.082  0.050 -0.101  0.001  0.218 -0.025
  2002 -0.793 -0.282 -0.086  0.292 -0.540 -0.207 -0.591 -0.655
  2003  0.246 -0.608  0.394  0.244 -0.332  0.253 -0.100  0.773
  2004 -0.191  0.057 -0.079  0.341 -0.088 -0.043  0.826  0.755
  2005 -0.411 -0.034 -0.004  0.005  0.828  0.322  1.577  0.700
  2006 -0.433 -0.047 -0.352 -0.271  0.112  0.206 -0.020 -0.815
  2007 -0.053  0.251 -0.089 -0.198 -0.481 -0.577 -0.196 -0.780
  2008 -0.887 -0.151  0.016 -0.056 -0.761 -0.089  0.259 -1.170
  2009 -0.416 -0.354 -0.188  0.289 -0.243 -0.485  0.294 -0.067
  2010 -0.292 -0.145 -0.239 -0.161  0.234 -0.253 -0.150 -0.036
  2011  0.319 -0.039 -0.341 -0.171  0.319 -0.024 -0.699 -0.275
  2012  0.348  0.452  0.192 -0.099  0.085  0.202 -0.054  0.710
  2013  1.857  0.326  0.333 -0.018  0.137 -0.407  0.180  0.150
  2014 -0.630  0.149  0.391 -0.119  0.246  0.675 -0.488 -1.296
  2015 -0.948  0.072 -0.092 -0.300  0.616 -0.312 -0.718  0.347
  2016  0.027 -0.077 -0.087  0.142 -0.003  0.036  0.214 -0.013
  2017 -0.151  0.228  0.219 -0.158  0.406  0.070 -0.116  0.921
  2018 -0.295 -0.158 -0.221  0.094 -0.031  0.117 -0.268 -0.511
  2019 -0.387 -0.026 -0.156 -0.006 -0.498  0.273 -0.561  0.225
  2020  0.340 -0.115 -0.086 -0.053 -0.164 -0.038 -0.022  0.131
  2021  2.152  0.657  0.259  0.189  0.148  0.144  0.717  1.027
  2022  0.530  0.073  0.298 -0.038  0.111  0.134 -0.302 -0.096
"""
_B2_PRINTED = """\
  2001  0.068 -0.147  0.037 -0.048 -0.296  0.159 -0.006  0.184
  2002 -0.793 -0.530 -0.232  0.119 -0.463 -0.369 -0.052 -0.686
  2003  0.246 -0.321  0.141  0.116 -0.559 -0.220 -0.295  0.935
  2004 -0.191  0.195 -0.126  0.601 -0.304  0.000  1.535  0.945
  2005 -0.411  0.195 -0.186 -0.203  0.857  0.530  1.807  0.884
  2006 -0.433 -0.019 -0.591 -0.293  0.045 -0.481 -0.784 -0.704
  2007 -0.053  0.057 -0.454 -0.867 -0.606 -0.317 -0.926 -1.442
  2008 -0.887 -0.190 -0.397 -0.025 -0.967 -0.607 -0.414 -1.151
  2009 -0.416 -0.442 -0.035  0.345 -0.951 -0.430 -0.378 -0.255
  2010 -0.292 -0.404 -0.195 -0.034 -0.164 -0.536  0.167 -0.122
  2011  0.319 -0.103 -0.149  0.145  0.026 -0.513 -1.677 -0.200
  2012  0.348  0.443  0.392  0.015 -0.324  0.654  0.363  0.707
  2013  1.857  0.081  0.461  0.092  0.032 -0.606  0.299  0.463
  2014 -0.630  0.172  0.516 -0.078  0.688  0.971 -0.090 -1.100
  2015 -0.948 -0.063  0.094 -0.279  0.670 -0.017  0.061  0.452
  2016  0.027 -0.220 -0.370  0.329 -0.141 -0.481  0.483 -0.051
  2017 -0.151 -0.066  0.200 -0.200  0.331 -0.061 -0.271  0.853
  2018 -0.295 -0.450 -0.053  0.009 -0.348 -0.383 -0.289 -0.469
  2019 -0.387  0.130 -0.015 -0.127 -0.073  0.898 -0.006  0.475
  2020  0.340  0.036 -0.113 -0.051 -0.308  0.032 -0.385 -0.006
  2021  2.152  1.406  0.558  0.509  1.370  0.217  1.952  0.949
  2022  0.530  0.240  0.517 -0.044  1.483  1.560 -1.092 -0.660
"""


def _parse_block(block):
    arr = np.array([[float(v) for v in line.split()] for line in block.strip().splitlines()])
    return arr[:, 1:]


PRINTED_RESIDUALS = {
    "B1": _parse_block(_B1_PRINTED),
    "B2": _parse_block(_B2_PRINTED),
}
for _arr in PRINTED_RESIDUALS.values():
    _arr.setflags(write=False)
MODEL_RESIDUAL_TABLE = {"glm": "B2", "gam": "B1"}

_S = BELOW_001

# Factor p-values of the GLM and GAM fits, per city (CITIES order).
PUBLISHED_PVALUES = {
    "glm": {
        "new_homes": (0.747, 0.189, 0.184, 0.103, 0.025, 0.515, 0.176, 0.632),
        "accessible": (0.467, 0.994, 0.169, 0.315, 0.585, _S, 0.353, 0.320),
        "central_ac": (0.594, 0.234, 0.169, 0.117, 0.024, 0.700, 0.550, 0.879),
        "green": (0.500, 0.100, 0.249, 0.633, 0.247, 0.116, 0.191, 0.457),
        "waterfront": (0.629, 0.975, 0.838, 0.807, 0.041, 0.929, 0.855, 0.242),
    },
    "gam": {
        "new_homes": (0.747, 0.151, 0.100, 0.017, 0.091, 0.152, 0.017, 0.555),
        "accessible": (0.467, 0.945, 0.031, 0.021, 0.677, _S, 0.720, 0.169),
        "central_ac": (0.594, 0.240, 0.063, 0.027, 0.085, 0.015, 0.032, 0.997),
        "green": (0.500, 0.019, 0.356, 0.188, 0.102, _S, 0.073, 0.363),
        "waterfront": (0.629, 0.646, 0.069, 0.085, _S, 0.984, 0.123, 0.462),
    },
}
PUBLISHED_ADJ_R2 = {
    "glm": (-0.167, -0.061, 0.144, 0.159, 0.218, 0.504, -0.525, 0.226),
    "gam": (-0.167, 0.388, 0.518, 0.560, 0.703, 0.855, 0.468, 0.349),
}

# Percent of city area that is water (2023 US Census Gazetteer Files) and
# percent of seniors living alone (2010 US Census).
WATER_AREA_PCT = (0.7, 2.0, 2.6, 14.5, 4.2, 2.3, 7.9, 40.9)
SENIORS_ALONE_PCT = (3.8, 4.6, 7.2, 7.9, 8.2, 13.4, 9.0, 4.1)

# Proportion of explained variance per principal component of the residuals.
PUBLISHED_EXPLAINED = {
    "glm": (0.453, 0.205, 0.111, 0.087, 0.061, 0.041, 0.028, 0.014),
    "gam": (0.319, 0.209, 0.144, 0.138, 0.075, 0.050, 0.039, 0.028),
}

# Transformations used per city: rtn = arithmetic return, fd = first difference.
PUBLISHED_PLAN = {
    "new_homes": ("rtn",) * 8,
    "central_ac": ("rtn",) * 8,
    "green": ("rtn", "rtn", "fd", "rtn", "rtn", "rtn", "rtn", "rtn"),
    "accessible": ("rtn",) * 7 + ("fd",),
    "waterfront": ("fd",) * 8,
}
PUBLISHED_Q = (2, 1, 1, 2, 1, 1, 2, 2)


def published_pvalues(model):
    """Return ``{city: {factor: p}}`` for one model of the printed table."""
    block = PUBLISHED_PVALUES[model]
    return {c: {f: block[f][i] for f in FACTORS} for i, c in enumerate(CITIES)}
