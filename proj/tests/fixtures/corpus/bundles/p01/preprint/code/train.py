lr = 3e-4
seed = 0
