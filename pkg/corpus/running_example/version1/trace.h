/* Minimal logging shim: emits "# bdci trace v1" blocks for instrumented
 * functions.  Output path comes from TRACE_OUT, the version label from
 * TRACE_LABEL.  Exit blocks re-emit the entry-time parameter values, so
 * instrumented functions must not reassign their parameters. */
#ifndef TRACE_H
#define TRACE_H

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static FILE *trace_fp = NULL;

static void trace_open_once(void) {
    const char *path;
    const char *label;
    if (trace_fp != NULL) {
        return;
    }
    path = getenv("TRACE_OUT");
    trace_fp = fopen(path != NULL ? path : "trace.out", "w");
    if (trace_fp == NULL) {
        fprintf(stderr, "trace: cannot open output file\n");
        exit(1);
    }
    fprintf(trace_fp, "# bdci trace v1\n");
    label = getenv("TRACE_LABEL");
    if (label != NULL) {
        fprintf(trace_fp, "L %s\n", label);
    }
}

static int trace_next_id(const char *function) {
    static const char *names[16];
    static int counts[16];
    static int used = 0;
    int i;
    for (i = 0; i < used; i++) {
        if (strcmp(names[i], function) == 0) {
            return counts[i]++;
        }
    }
    names[used] = function;
    counts[used] = 1;
    used++;
    return 0;
}

static int trace_enter(const char *function) {
    int id = trace_next_id(function);
    trace_open_once();
    fprintf(trace_fp, "PP %s ENTER %d\n", function, id);
    return id;
}

static void trace_exit(const char *function, int id) {
    trace_open_once();
    fprintf(trace_fp, "PP %s EXIT %d\n", function, id);
}

static void trace_int(const char *name, int value) {
    fprintf(trace_fp, "V %s int %d\n", name, value);
}

static void trace_end(void) {
    fprintf(trace_fp, "EE\n");
    fflush(trace_fp);
}

#endif
