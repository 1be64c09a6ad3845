/* The public header compiles as C and the library links from C. */
#include <stdio.h>
#include <string.h>

#include "qsynth/qsynth.h"

int main(void) {
  char names[256];
  qs_model* m = NULL;
  char hash[17];
  if (qs_models_list(names, sizeof names) != QS_OK) return 1;
  if (strncmp(names, "buck\n", 5) != 0) return 2;
  if (qs_model_builtin("buck", 0, &m) != QS_OK) return 3;
  if (qs_model_hash(m, hash, sizeof hash) != QS_OK || strlen(hash) != 16) return 4;
  qs_model_free(m);
  if (qs_model_builtin("nope", 0, &m) != QS_ERR_INVALID_ARGUMENT) return 5;
  printf("qsynth %s\n", qs_version());
  return 0;
}
