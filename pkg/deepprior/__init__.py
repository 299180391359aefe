# Depth-based 3D hand pose estimation with a PCA pose prior
