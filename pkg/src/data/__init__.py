"""
Constant tables: down-weighting grids, simulation design schedules and published reference values.
"""
