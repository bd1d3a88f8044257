MATRIX = [[[[1]]]]
