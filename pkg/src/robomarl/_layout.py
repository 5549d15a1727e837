"""Column layout of the packed body and parameter arrays shared by both kernel backends."""

# body state row
X, Y, TH, VX, VY, WZ = 0, 1, 2, 3, 4, 5
W0 = 6  # wheel speeds W0..W0+3 (FL, FR, RL, RR)
I0 = 10  # PID integrals
E0 = 14  # PID previous errors
BODY_SIZE = 18

# per-robot parameter row
MU_SLIDE = 0
MU_ROLL = 1
TAU_MAX = 2
KP = 3
KI = 4
KD = 5
MASS = 6
WHEEL_INERTIA = 7
WHEEL_RADIUS = 8
LX = 9
LY = 10
I_MAX = 11
GRAVITY = 12
RADIUS = 13
V_MAX = 14
W_MAX = 15
PARAM_SIZE = 16

# collision push-out margin so resolved poses are strictly clear of obstacles
CONTACT_EPS = 1e-9
