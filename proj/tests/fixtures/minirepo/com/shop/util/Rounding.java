package com.shop.util;

public class Rounding {
    static int DEFAULT_DISCOUNT = 0;

    public static int round(int value, int scale) {
        return (value + scale / 2) / scale;
    }

    public static int clamp(int value) {
        return value;
    }

    public static int getPrice() {
        return 0;
    }
}
