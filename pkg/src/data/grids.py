#Exponential down-weighting coefficients. Forecasts are averaged over every value of a grid.
grids = {'none': (1.0,),
         'light': (0.975, 0.98, 0.985, 0.99, 0.995, 1.0),
         'heavy': (0.95, 0.96, 0.97, 0.98, 0.99, 1.0)}
