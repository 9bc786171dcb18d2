#include <stdio.h>
#include <string.h>
#include "thermistor.h"

static const char *CFG =
    "[grid]\nnx = 4\nny = 4\nnz = 4\nlx = 1.0\nly = 1.0\nell = 1.0\n"
    "[circuit]\nlambda1 = 1.0\nlambda2 = 1.0\nlambda3 = 1.0\nv0 = 1.0\nv0_prime = 0.0\n"
    "[laws]\nsigma = constant 1.0\nk = constant 1.0\nh = linear 1.0\n"
    "[thermal]\ntheta0 = constant 2.0\ntheta_gamma = constant 2.0\ntheta_star = 1.0\n"
    "[scheme]\ntau = 0.016\ndt = 0.004\nt_final = 0.048\n";

int main(void) {
    printf("version: %s\n", thermistor_version());
    thermistor_config *cfg = NULL;
    if (thermistor_config_parse(CFG, &cfg) != THERMISTOR_OK) {
        fprintf(stderr, "parse: %s\n", thermistor_last_error());
        return 1;
    }
    double tau_star = 0.0;
    thermistor_tau_star(cfg, &tau_star);
    printf("tau_star = %.6f\n", tau_star);

    thermistor_run *run = NULL;
    if (thermistor_run_execute(cfg, &run) != THERMISTOR_OK) {
        fprintf(stderr, "run: %s\n", thermistor_last_error());
        return 1;
    }
    size_t n = thermistor_run_num_nodes(run);
    double t, v;
    thermistor_run_node(run, n - 1, &t, &v, NULL, NULL);
    printf("nodes = %zu, V(%.3f) = %.8f, checks_passed = %d\n", n, t, v,
           thermistor_run_checks_passed(run));

    double p, q;
    thermistor_exponent_pair(5.0 / 6.0, &p, &q);
    printf("exponents: p = %.6f, q = %.6f\n", p, q);

    /* negative path: invalid config must leave a message */
    thermistor_config *bad = NULL;
    if (thermistor_config_parse("[grid]\nnx = 1\n", &bad) == THERMISTOR_OK) return 1;
    if (strlen(thermistor_last_error()) == 0) return 1;

    thermistor_run_free(run);
    thermistor_config_free(cfg);
    return 0;
}
