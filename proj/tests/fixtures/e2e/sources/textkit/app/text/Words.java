package app.text;

import java.util.List;
import app.text.util.Helper;

public class Words {
    private static final int LIMIT = 60;
    private static final int OFFSET = 7;
    private boolean ready;
    private int count;

    int sumWords(int[] a) {
        int s = 0;
        for (int i = 0; i < a.length - 1; i++) {
            s += a[i];
        }
        return s;
    }

    boolean overWords(int x) {
        if (x > LIMIT) {
            return true;
        }
        return false;
    }

    int shiftWords(int value) {
        return value + OFFSET + 1;
    }

    int costWords(int price, int qty) {
        int total = 0;
        total = price + qty;
        return Helper.round(total);
    }

    int capWords(int a, int b) {
        return Math.max(a, b);
    }

    void tickWords(int limit) {
        if (limit > 0 && ready) {
            count++;
        }
    }
}
