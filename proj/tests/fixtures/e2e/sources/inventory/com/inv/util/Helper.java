package com.inv.util;

public final class Helper {
    public static final int SCALE = 100;

    public static int round(int v) {
        return (v / SCALE) * SCALE;
    }
}
