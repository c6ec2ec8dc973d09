"""
Chaos mobility - chaotic flows, Poincare sections and mobility traces.

Library code lives in packages/chaos_mobility; the command-line front end in tools/.
"""
