#pragma omp parallel for private(ofm_tile, ifm_tile, oj, kj, ki)
for (int img = 0; img < 2; ++img) {
  for (int ofm_tile = 0; ofm_tile < 2; ++ofm_tile) {
    for (int ifm_tile = 0; ifm_tile < 2; ++ifm_tile) {
      for (int oj = 0; oj < 4; ++oj) {
        for (int kj = 0; kj < 3; ++kj) {
          for (int ki = 0; ki < 3; ++ki) {
            gemm_microkernel(&output[img][ofm_tile][oj][0][0], &filter[ofm_tile][ifm_tile][kj][ki][0][0], &input[img][ifm_tile][oj + kj][ki][0]);
          }
        }
      }
    }
  }
}
