"""Line-commutated converter model for a two-terminal DC link.

All DC-side quantities stay in physical units (kV, kA, ohms, MW). The
inverter end holds the DC voltage setpoint; the rectifier DC voltage adds
the line drop. Firing (alpha) and extinction (gamma) angles follow from
the converter equation at each terminal, with the converter transformer
tap stepping to pull the angle inside its permitted range and then as far
toward the lower bound as the tap allows (minimum reactive absorption).
"""

import math
from dataclasses import dataclass

from .errors import InfeasibleLinkError, StructuralError
from .fdpf import DcInjection
from .grid import CONTROL_CURRENT_VOLTAGE, CONTROL_POWER_VOLTAGE, LccLink

K_IDEAL = 3.0 * math.sqrt(2.0) / math.pi  # ideal no-load voltage factor
K_OVERLAP = 3.0 / math.pi  # commutation overlap drop factor


@dataclass
class ConverterSolution:
    r_bus: int
    i_bus: int
    control: str
    v_dc_r: float  # kV
    v_dc_i: float
    i_dc: float  # kA
    alpha: float  # degrees
    gamma: float
    phi_r: float  # degrees, power-factor angle at the rectifier bus
    phi_i: float
    tap_r: float
    tap_i: float
    p_r: float  # MW entering the rectifier DC terminal
    q_r: float  # MVAr absorbed at the rectifier AC bus
    p_i: float  # MW leaving the inverter DC terminal
    q_i: float
    limit_flags: tuple = ()
    converged: bool = True


def solve_dc_link(link: LccLink, v_r_pu, base_kv_r, v_i_pu, base_kv_i, link_id=0):
    """Solve one link given its AC terminal voltages (p.u. and bus base kV)."""
    _validate(link, link_id)

    if link.control == CONTROL_POWER_VOLTAGE:
        if link.r_dc == 0.0:
            i_dc = link.p_set / link.v_set
        else:
            disc = link.v_set * link.v_set + 4.0 * link.r_dc * link.p_set
            if disc < 0.0:
                raise InfeasibleLinkError(link_id, "dc_current_discriminant", disc)
            i_dc = (-link.v_set + math.sqrt(disc)) / (2.0 * link.r_dc)
    else:  # I-V control
        i_dc = link.i_set

    v_dc_i = link.v_set
    v_dc_r = link.v_set + i_dc * link.r_dc
    p_r = v_dc_r * i_dc  # kV * kA = MW
    p_i = v_dc_i * i_dc

    tap_r, alpha, cos_a, flags_r, ok_r = _settle_angle(
        link, link_id, "rectifier", v_dc_r, link.bridges_r, link.xc_r, i_dc,
        v_r_pu * base_kv_r, link.tap_r, link.alpha_min, link.alpha_max,
    )
    tap_i, gamma, cos_g, flags_i, ok_i = _settle_angle(
        link, link_id, "inverter", v_dc_i, link.bridges_i, link.xc_i, i_dc,
        v_i_pu * base_kv_i, link.tap_i, link.gamma_min, link.gamma_max,
    )

    phi_r = _power_factor_angle(cos_a, link.xc_r, i_dc, v_r_pu * base_kv_r / tap_r)
    phi_i = _power_factor_angle(cos_g, link.xc_i, i_dc, v_i_pu * base_kv_i / tap_i)
    q_r = p_r * math.tan(math.radians(phi_r))
    q_i = p_i * math.tan(math.radians(phi_i))

    return ConverterSolution(
        r_bus=link.r_bus,
        i_bus=link.i_bus,
        control=link.control,
        v_dc_r=v_dc_r,
        v_dc_i=v_dc_i,
        i_dc=i_dc,
        alpha=alpha,
        gamma=gamma,
        phi_r=phi_r,
        phi_i=phi_i,
        tap_r=tap_r,
        tap_i=tap_i,
        p_r=p_r,
        q_r=q_r,
        p_i=p_i,
        q_i=q_i,
        limit_flags=tuple(flags_r + flags_i),
        converged=ok_r and ok_i,
    )


def _validate(link, link_id):
    if link.bridges_r < 1 or link.bridges_i < 1:
        raise StructuralError(f"link {link_id}: bridge count must be >= 1")
    if link.v_set <= 0.0:
        raise StructuralError(f"link {link_id}: DC voltage setpoint must be positive")
    if link.control == CONTROL_POWER_VOLTAGE and link.p_set <= 0.0:
        raise StructuralError(f"link {link_id}: P-V control needs a positive p_set")
    if link.control == CONTROL_CURRENT_VOLTAGE and link.i_set < 0.0:
        raise StructuralError(f"link {link_id}: negative current setpoint")
    if link.tap_step <= 0.0 or link.tap_min <= 0.0 or link.tap_min > link.tap_max:
        raise StructuralError(f"link {link_id}: bad tap parameters")


def _cos_angle(num, tap, v_ac_kv):
    """cos(angle) as a function of the transformer tap; linear in tap."""
    return num * tap / (K_IDEAL * v_ac_kv)


def _classify(c, a_min, a_max):
    """-1: angle above max (cos too small), +1: below min, 0: in range."""
    if c <= 0.0:
        return -1
    if c >= 1.0:
        return 1
    a = math.degrees(math.acos(c))
    if a < a_min:
        return 1
    if a > a_max:
        return -1
    return 0


def _settle_angle(link, link_id, side, v_dc, bridges, xc, i_dc, v_ac_kv, tap0,
                  a_min, a_max):
    """Find the transformer tap and firing/extinction angle for one side.

    cos(angle) grows linearly with the tap, so the angle falls as the tap
    rises. The tap first steps toward the feasible range, then keeps
    stepping toward the angle's lower bound while it stays feasible.
    Returns (tap, angle_deg, cos_value, flags, in_range).
    """
    num = v_dc / bridges + K_OVERLAP * xc * i_dc
    if v_ac_kv <= 0.0:
        raise InfeasibleLinkError(link_id, f"{side}_ac_voltage_kv", v_ac_kv)

    eps = 1e-9
    lo = int(math.ceil((link.tap_min - tap0) / link.tap_step - eps))
    hi = int(math.floor((link.tap_max - tap0) / link.tap_step + eps))

    def tap_at(k):
        return tap0 + k * link.tap_step

    k = 0
    if not (lo <= 0 <= hi):
        raise StructuralError(f"link {link_id}: initial {side} tap outside its range")

    cls = _classify(_cos_angle(num, tap_at(k), v_ac_kv), a_min, a_max)
    flags = []
    visited = {k}
    while cls != 0:
        # angle below its minimum (cos too large) -> lower the tap; above
        # its maximum -> raise it
        nk = k - 1 if cls == 1 else k + 1
        if nk < lo or nk > hi or nk in visited:
            c = _cos_angle(num, tap_at(k), v_ac_kv)
            if not (0.0 < c <= 1.0):
                raise InfeasibleLinkError(link_id, f"cos_{side}", c)
            flags.append(f"tap_{side}_bound")
            a = math.degrees(math.acos(c))
            return tap_at(k), a, c, flags, False
        k = nk
        visited.add(k)
        cls = _classify(_cos_angle(num, tap_at(k), v_ac_kv), a_min, a_max)

    # feasible: walk toward the lower angle bound (higher tap) while staying
    # feasible and inside the tap range
    while k + 1 <= hi:
        c_next = _cos_angle(num, tap_at(k + 1), v_ac_kv)
        if _classify(c_next, a_min, a_max) != 0:
            break
        k += 1
    c = _cos_angle(num, tap_at(k), v_ac_kv)
    return tap_at(k), math.degrees(math.acos(c)), c, flags, True


def _power_factor_angle(cos_angle, xc, i_dc, e_ac_kv):
    """Power-factor angle (degrees) from the converter equation."""
    c = cos_angle - xc * i_dc / (math.sqrt(2.0) * e_ac_kv)
    c = min(1.0, max(-1.0, c))
    return math.degrees(math.acos(c))


def converter_injections(sol: ConverterSolution, base_mva):
    """Per-unit terminal demands, signed as loads on the AC buses."""
    return (
        DcInjection(bus=sol.r_bus, p_dc=sol.p_r / base_mva, q_dc=sol.q_r / base_mva),
        DcInjection(bus=sol.i_bus, p_dc=-sol.p_i / base_mva, q_dc=sol.q_i / base_mva),
    )
