"""
Library packages for the chaos mobility toolkit.

chaos_mobility holds flows, sections, return maps, mobility traces and metrics.
"""
